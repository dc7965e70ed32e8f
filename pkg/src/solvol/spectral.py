"""First eigenvalue of the weighted Laplacian on radial models.

The radial operator -psi'' - ((n-1) phi'/phi - f') psi' is self-adjoint in
the weight m_f(r) = e^{-f} phi^{n-1}.  It is discretized by cell-centred
finite volumes on (0, L): cell masses m_f(r_i) h, face conductances
m_f(r_{i+1/2}) / h, a closed face at the pole (m_f vanishes there) and a
Dirichlet face at L at distance h/2.  The symmetrized matrix is
tridiagonal; its smallest eigenvalue is located by Sturm-sequence bisection.
All weights enter through differences of log m_f, so neither the growth of
phi nor the decay of e^{-f} can overflow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numerics
from .bounds import thm1_5_check, thm1_5_constants
from .errors import DomainError, PreconditionError
from .models import PoleModel, QuasiEinstein

MIN_MESH = 64
COR_MESH = 4096
COR_SLACK = 1e-6
SWEEP = (1e-1, 1e-2, 1e-3)

STOCHASTIC_COMPLETENESS_REFERENCE = (
    "Volume test for stochastic completeness of weighted manifolds: "
    "divergence of ∫^∞ r dr / log Vol_f(B_r) implies f-stochastic completeness "
    "(Grigor'yan, Bull. AMS 36 (1999))."
)


@dataclass(frozen=True)
class SpectralEstimate:
    L: float
    mesh: int
    lambda1: float
    method: str = "sturm_liouville"
    discretization_error: float = float("nan")
    extrapolation: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def log_weight(model, r):
    """log m_f(r) = -f(r) + (n-1) log phi(r)."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):  # log 0 = -inf at the pole, weight 0
        return -model.f.value(r) + (model.n - 1) * np.log(model.phi.value(r))


def radial_operator(model, L, mesh):
    """Diagonal and off-diagonal of the symmetrized discrete operator."""
    h = L / mesh
    centers = (np.arange(mesh) + 0.5) * h
    faces = np.arange(1, mesh + 1) * h
    lc = log_weight(model, centers)
    lf = log_weight(model, faces)
    inner = lf[:-1]
    # conductance / mass ratios, formed in log space
    down = np.exp(inner - lc[:-1]) / h**2
    up = np.exp(inner - lc[1:]) / h**2
    diag = np.zeros(mesh)
    diag[:-1] += down
    diag[1:] += up
    diag[-1] += 2.0 * np.exp(lf[-1] - lc[-1]) / h**2
    off = -np.exp(inner - 0.5 * (lc[:-1] + lc[1:])) / h**2
    return diag, off


def _count_below(diag, e2, x):
    count = 0
    q = 1.0
    prev = 0.0
    for d, e in zip(diag, e2):
        q = d - x - (e / q if prev else 0.0)
        prev = 1.0
        if q == 0.0:
            q = -_TINY
        if q < 0:
            count += 1
    return count


_TINY = float(np.finfo(float).tiny)


def sturm_count(diag, off, x):
    """Number of eigenvalues below ``x`` (inertia of the LDL^T factorization)."""
    e2 = [0.0] + [float(e) ** 2 for e in off]
    return _count_below([float(d) for d in diag], e2, float(x))


def smallest_eigenvalue(diag, off, rtol=1e-14):
    """Smallest eigenvalue of a symmetric tridiagonal matrix by bisection."""
    d = np.asarray(diag, dtype=float)
    e = np.abs(np.asarray(off, dtype=float))
    radius = np.concatenate([[0.0], e]) + np.concatenate([e, [0.0]])
    lo = float(np.min(d - radius))
    hi = float(np.min(d))
    d_list = d.tolist()
    e2 = [0.0] + (e * e).tolist()
    while hi - lo > rtol * max(abs(lo), abs(hi), 1e-300):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _count_below(d_list, e2, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _check_spectral_model(model, L, mesh):
    if not isinstance(model, PoleModel):
        raise PreconditionError("spectral estimates need a pole model")
    if int(mesh) != mesh or mesh < MIN_MESH:
        raise PreconditionError(f"mesh must be an integer >= {MIN_MESH}")
    if not 0 < L <= model.r_max * (1 + 1e-12):
        raise DomainError(f"L must lie in (0, {model.r_max}]")


def _raw_lambda1(model, L, mesh):
    diag, off = radial_operator(model, L, mesh)
    return smallest_eigenvalue(diag, off)


def lambda1_estimate(model, L, mesh=COR_MESH) -> SpectralEstimate:
    """Dirichlet lambda_1 of the weighted Laplacian on the ball of radius L.

    The error estimate compares against mesh/2: for a second-order scheme
    |lambda(mesh) - lambda(mesh/2)| / 3 approximates the error at ``mesh``.
    """
    _check_spectral_model(model, L, mesh)
    mesh = int(mesh)
    L = min(float(L), model.r_max)
    fine = _raw_lambda1(model, L, mesh)
    coarse = _raw_lambda1(model, L, mesh // 2)
    return SpectralEstimate(L, mesh, fine, "sturm_liouville", abs(fine - coarse) / 3.0)


def extrapolate_in_L(model, radii, mesh=COR_MESH):
    """Dirichlet values at increasing L and a Richardson limit in 1/L.

    The Dirichlet gap above the bottom of the spectrum behaves like A/L^2,
    so successive pairs combine as (4 lam(2L) - lam(L)) / 3 when the radii
    double.  The general pair formula (L2^2 lam2 - L1^2 lam1)/(L2^2 - L1^2)
    is used for the last two radii.
    """
    radii = sorted(float(x) for x in radii)
    vals = [lambda1_estimate(model, x, mesh).lambda1 for x in radii]
    out = {"radii": radii, "values": vals, "method": "richardson_inverse_square_L"}
    if len(radii) >= 2:
        l1, l2 = radii[-2], radii[-1]
        v1, v2 = vals[-2], vals[-1]
        out["limit"] = (l2**2 * v2 - l1**2 * v1) / (l2**2 - l1**2)
    else:
        out["limit"] = vals[-1]
    return out


def rayleigh_parts(model, alpha, rcut, tol=1e-11):
    """(energy, mass, layer) for psi = e^{alpha r} eta with the unit-annulus cutoff eta.

    eta = 1 on [0, Rcut-1] and Rcut - r on [Rcut-1, Rcut], so |eta'| = 1 on
    the annulus.  ``layer`` is ∫ e^{2 alpha r} |eta'|^2 dmu, the cutoff part
    of the energy.  All three share the scale factor exp(-shift).
    """
    if rcut + 1.0 > model.r_max * (1 + 1e-12) or rcut <= 1.0:
        raise DomainError("rayleigh quotient needs 1 < Rcut and Rcut + 1 <= r_max")
    inner = rcut - 1.0
    sample = np.linspace(1e-3, rcut, 512)
    shift = float(np.max(2 * alpha * sample + log_weight(model, sample)))

    def density(r):
        return np.exp(2 * alpha * r + log_weight(model, r) - shift)

    def core(r):
        return density(r)

    def ring_energy(r):
        return (alpha * (rcut - r) - 1.0) ** 2 * density(r)

    def ring_mass(r):
        return (rcut - r) ** 2 * density(r)

    ball = numerics.integrate(core, 0.0, inner, tol)
    energy = alpha**2 * ball + numerics.integrate(ring_energy, inner, rcut, tol)
    mass = ball + numerics.integrate(ring_mass, inner, rcut, tol)
    layer = numerics.integrate(density, inner, rcut, tol)
    return energy, mass, layer


def rayleigh_quotient(model, alpha, rcut):
    """∫|∇psi|^2 dmu / ∫psi^2 dmu for psi = e^{alpha r} eta."""
    energy, mass, _ = rayleigh_parts(model, alpha, rcut)
    if not (mass > 0 and math.isfinite(mass) and math.isfinite(energy)):
        raise DomainError("degenerate Rayleigh quotient denominator")
    return energy / mass


def rayleigh_diagnostics(model, c, cuts=None, sweep=SWEEP):
    """Sweep delta and epsilon of the cutoff argument.

    For each delta, alpha = -(c + delta)/2 and each cutoff radius gives the
    quotient Q; for each epsilon the split estimate
    (1+eps) alpha^2 + ((1+eps)/eps) (layer / mass) must dominate Q.
    """
    if cuts is None:
        top = model.r_max - 1.0
        cuts = [x for x in (top / 4, top / 2, top) if x > 1.0]
    rows = []
    for delta in sweep:
        alpha = -(c + delta) / 2.0
        for rc in cuts:
            energy, mass, layer = rayleigh_parts(model, alpha, rc)
            q = energy / mass
            for eps in sweep:
                split = (1 + eps) * alpha**2 + (1 + eps) / eps * layer / mass
                rows.append({"delta": delta, "eps": eps, "Rcut": rc, "quotient": q,
                             "split_bound": split,
                             "limit_threshold": (1 + eps) * (c + delta) ** 2 / 4.0,
                             "split_ok": bool(q <= split * (1 + 1e-10))})
    return rows


def _require_flat_qe(model):
    kind = getattr(model, "kind", None)
    if not isinstance(kind, QuasiEinstein) or kind.lam != 0:
        raise PreconditionError("needs a quasi-Einstein model with lam = 0")


def cor1_4_check(model, mesh=COR_MESH, r0=1.0, profile_limit=None):
    """lambda_1 <= c^2/4 with c the weighted growth rate at r0.

    The Dirichlet value on the ball of radius L over-estimates lambda_1, so
    a failure at L = r_max is retried once at 2L when the profiles extend
    that far (``profile_limit`` defaults to the profile domain).
    """
    _require_flat_qe(model)
    consts = thm1_5_constants(model, r0)
    threshold = consts.rate**2 / 4.0
    est = lambda1_estimate(model, model.r_max, mesh)
    attempts = [{"L": est.L, "lambda1": est.lambda1,
                 "discretization_error": est.discretization_error}]
    limit = min(model.phi.r_max, model.f.r_max) if profile_limit is None else profile_limit
    if est.lambda1 > threshold + COR_SLACK and 2 * model.r_max <= limit:
        wider = model.with_r_max(2 * model.r_max)
        est = lambda1_estimate(wider, wider.r_max, mesh)
        attempts.append({"L": est.L, "lambda1": est.lambda1,
                         "discretization_error": est.discretization_error})
    passed = bool(est.lambda1 <= threshold + COR_SLACK)
    return {"model_id": model.name, "c": consts.rate, "b": consts.prefactor,
            "lambda1": est.lambda1, "threshold": threshold, "pass": passed,
            "fallback": consts.fallback, "mesh": int(mesh), "attempts": attempts}


def stochastic_completeness_certificate(model, grid=None, r0=1.0):
    """Certificate log Vol_f(B_r) <= log b + c r on the verified grid.

    Exponential growth of the weighted volume makes ∫^∞ r dr / log Vol_f(B_r)
    diverge; the step from there to f-stochastic completeness is the cited
    volume test, not re-proved here.  ``issued`` is false when the growth
    check fails.
    """
    _require_flat_qe(model)
    report = thm1_5_check(model, grid, r0)
    return {
        "model_id": model.name,
        "c": report.constants["c"],
        "b": report.constants["b"],
        "r0": r0,
        "grid": [float(report.grid[0]), float(report.grid[-1]), int(report.grid.size)],
        "statement": "log Vol_f(B_r) <= log b + c r for r in the verified grid",
        "issued": report.passed,
        "min_margin": report.min_margin,
        "reference": STOCHASTIC_COMPLETENESS_REFERENCE,
    }
