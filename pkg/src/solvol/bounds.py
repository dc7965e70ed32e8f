"""Ball volumes and the volume-growth bounds, with dominance reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .comparison import INNER_TOL, comparison_integrand, qe_phi, shrinker_log_factor
from .curvature import HypothesisReport, verify_hypotheses
from .errors import DomainError, HypothesisError, PreconditionError
from .models import MetricMeasure, PoleModel, QuasiEinstein, Shrinker

MARGIN_TOL = 1e-8
VOLUME_TOL = 1e-11
FALLBACK_RATE = 1e-6

BOUND_KINDS = ("thm1_1", "cor1_2_infR", "cor1_2_plain", "thm1_3",
               "thm1_5", "thm1_6", "thm1_7")


def sphere_area(n):
    """Area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _radial_integral(integrand, r, tol=VOLUME_TOL, start=0.0):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    # volumes and bound integrands are positive; ask for relative accuracy
    # so that small balls are resolved as well as large ones
    if r.size > 1 and np.all(np.diff(r) > 0):
        left = np.concatenate([[start], r[:-1]])
        pieces, _ = numerics.integrate_many(integrand, left, r, tol, relative=True)
        return np.cumsum(pieces)
    vals, _ = numerics.integrate_many(integrand, start, r, tol, relative=True)
    return vals


def _volume(model, r, weight):
    n = model.n
    phi = model.phi.value

    def density(s):
        return phi(s) ** (n - 1) * weight(s)

    return sphere_area(n) * _radial_integral(density, r)


def _unit_weight(s):
    return np.exp(-np.zeros_like(s))


def ball_volume(model: PoleModel, r):
    """Vol(B(r)) = |S^{n-1}| ∫_0^r phi^{n-1}."""
    r = model.check_radius(np.atleast_1d(r))
    return _volume(model, r, _unit_weight)


def weighted_ball_volume(model: PoleModel, r):
    """Vol_f(B(r)) = |S^{n-1}| ∫_0^r e^{-f} phi^{n-1}."""
    r = model.check_radius(np.atleast_1d(r))
    f = model.f.value
    return _volume(model, r, lambda s: np.exp(-f(s)))


def density_log_derivative(model, r):
    """m_f'/m_f = -f' + (n-1) phi'/phi for the weighted density e^{-f} phi^{n-1}."""
    r = np.asarray(r, dtype=float)
    return -model.f.deriv1(r) + (model.n - 1) * model.phi.deriv1(r) / model.phi.value(r)


def log_density(model, r):
    r = np.asarray(r, dtype=float)
    return -model.f.value(r) + (model.n - 1) * np.log(model.phi.value(r))


# -- shrinker-type bounds ---------------------------------------------------

def _require_shrinker_type(model):
    if not isinstance(model, PoleModel) or not isinstance(model.kind, (Shrinker, MetricMeasure)):
        raise PreconditionError("bound applies to shrinkers and metric measure spaces only")


def _averaged_bound(model, r, log_factor):
    """|S^{n-1}| ∫_0^r exp(log_factor(t)) t^{n-1} dt."""
    n = model.n

    def integrand(t):
        return np.exp(log_factor(t)) * t ** (n - 1)

    return sphere_area(n) * _radial_integral(integrand, r)


def thm1_1_bound(model, r):
    """Sharp volume bound for shrinkers, read as ∫_0^r e^{f(0) - avg_t R} t^{n-1} dt."""
    _require_shrinker_type(model)
    if isinstance(model.kind, MetricMeasure):
        return thm1_7_bound(model, r)[0]
    r = model.check_radius(np.atleast_1d(r))
    return _averaged_bound(model, r, shrinker_log_factor(model))


def grid_infimum(fn, r_max, grid=None, refine=10):
    """Infimum of ``fn`` over (0, r_max], sampled on the grid extended to
    r_max and refined ``refine``-fold around the sampled minimum."""
    pts = numerics.default_grid(r_max, 512)
    if grid is not None:
        pts = np.unique(np.concatenate([pts, np.asarray(grid, dtype=float)]))
    vals = fn(pts)
    i = int(np.argmin(vals))
    lo = pts[max(i - 1, 0)]
    hi = pts[min(i + 1, pts.size - 1)]
    fine = np.linspace(lo, hi, 2 * refine + 1)
    fine = fine[fine > 0]
    return float(min(vals[i], np.min(fn(fine))))


def cor1_2_bounds(model, r, grid=None):
    """(e^{f(0) - inf G} ω_n r^n, e^{f(0)} ω_n r^n), G = R or f - |∇f|^2."""
    _require_shrinker_type(model)
    r = model.check_radius(np.atleast_1d(r))
    G = comparison_integrand(model)
    inf_g = grid_infimum(G, model.r_max, grid)
    f0 = float(model.f.value(np.zeros(1))[0])
    base = unit_ball_volume(model.n) * r ** model.n
    return math.exp(f0 - inf_g) * base, math.exp(f0) * base


def thm1_7_bound(model, r, grid=None, report: HypothesisReport | None = None):
    """Metric measure bound; returns (fine, coarse) after checking the hypotheses."""
    if not isinstance(model, PoleModel) or not isinstance(model.kind, MetricMeasure):
        raise PreconditionError("bound applies to metric measure models only")
    if report is None:
        report = verify_hypotheses(model, numerics.default_grid(model.r_max) if grid is None else grid)
    if not report.passed:
        raise HypothesisError("Ric_f >= g/2 or |∇f|^2 <= f fails on the model", report)
    r = model.check_radius(np.atleast_1d(r))
    fine = _averaged_bound(model, r, shrinker_log_factor(model))
    coarse, _ = cor1_2_bounds(model, r, grid)
    return fine, coarse


# -- quasi-Einstein bounds --------------------------------------------------

def _require_qe(model, lam_zero):
    kind = getattr(model, "kind", None)
    if not isinstance(model, PoleModel) or not isinstance(kind, QuasiEinstein):
        raise PreconditionError("bound applies to quasi-Einstein pole models only")
    if lam_zero and kind.lam != 0:
        raise PreconditionError("bound needs lam = 0")


def thm1_3_bound(model, r, variant="statement"):
    """|S^{n-1}| ∫_0^r e^{Phi(t)} t^{n-1} dt for lam = 0 quasi-Einstein models."""
    _require_qe(model, lam_zero=True)
    r = model.check_radius(np.atleast_1d(r))
    return _averaged_bound(model, r, qe_phi(model, variant))


@dataclass(frozen=True)
class ExpBoundConstants:
    """Constants of an exponential growth bound prefactor * exp(rate * r), r >= r0."""

    r0: float
    C: float
    rate: float
    prefactor: float
    fallback: bool = False
    extra: dict = field(default_factory=dict)


def thm1_5_constants(model, r0=1.0) -> ExpBoundConstants:
    """Weighted growth constants from the density at the anchor radius.

    c = (m_f'/m_f)(r0).  Since log m_f is concave, m_f(r) <= m_f(r0) e^{c(r-r0)}
    and integrating gives Vol_f(B_r) <= b e^{cr} with
    b = Vol_f(B_{r0}) + |S^{n-1}| m_f(r0) e^{-c r0} / c.
    For c <= 0 the density is nonincreasing past r0; then b is the weighted
    volume through r_max and the rate is a token FALLBACK_RATE.
    """
    _require_qe(model, lam_zero=True)
    if not 0 < r0 <= model.r_max:
        raise DomainError("anchor radius outside the model")
    c = float(density_log_derivative(model, np.array([r0]))[0])
    vol0 = float(weighted_ball_volume(model, [r0])[0])
    m0 = math.exp(float(log_density(model, np.array([r0]))[0]))
    if c > 0:
        b = vol0 + sphere_area(model.n) * m0 * math.exp(-c * r0) / c
        return ExpBoundConstants(r0, c, c, b)
    b = float(weighted_ball_volume(model, [model.r_max])[0])
    return ExpBoundConstants(r0, c, FALLBACK_RATE, b, fallback=True)


def _thm1_6_hypotheses(model):
    _require_qe(model, lam_zero=False)
    kind = model.kind
    if not (kind.lam < 0 and kind.mu <= 0 and 1 < kind.m < math.inf):
        raise PreconditionError("bound needs lam < 0, mu <= 0 and m in (1, inf)")
    if model.r_max < 1:
        raise PreconditionError("bound needs r_max >= 1")


def gradient_bound_constant(kind):
    """-m^2 lam / (m - 1), the square of the gradient bound for f."""
    return -kind.m**2 * kind.lam / (kind.m - 1)


def thm1_6_constants(model, anchor=1.0) -> ExpBoundConstants:
    """Rate and prefactor for Vol(B_r) <= a e^{b r}, r >= anchor.

    C = w(1) + (m/(n-1)) (u'/u)(1) + lam, the integration constant at the
    anchor; b = sqrt(C + sqrt(-m^2 lam/(m-1))/(n-1) - lam).  The prefactor
    assumes the density envelope J^{n-1}(t) <= J(1)^{n-1} e^{b(t-1)}:
    a = Vol(B_1) + |S^{n-1}| J(1)^{n-1} e^{-b} / b.  The chain itself
    delivers J(r) <= J(1) e^{br}, i.e. rate (n-1) b for the volume; that
    variant is returned in ``extra``.
    """
    _thm1_6_hypotheses(model)
    kind, n = model.kind, model.n
    x = np.array([anchor])
    phi1 = float(model.phi.value(x)[0])
    w1 = float(model.phi.deriv1(x)[0]) / phi1
    u_log_slope = -float(model.f.deriv1(x)[0]) / kind.m
    C = w1 + kind.m / (n - 1) * u_log_slope + kind.lam
    grad_c = gradient_bound_constant(kind)
    radicand = C + math.sqrt(grad_c) / (n - 1) - kind.lam
    if radicand <= 0:
        raise HypothesisError(f"rate radicand {radicand!r} is not positive")
    b = math.sqrt(radicand)
    vol1 = float(ball_volume(model, [anchor])[0])
    area = sphere_area(n)
    a = vol1 + area * phi1 ** (n - 1) * math.exp(-b * anchor) / b
    chain_rate = (n - 1) * b
    chain_a = vol1 + area * phi1 ** (n - 1) / chain_rate
    return ExpBoundConstants(anchor, C, b, a, extra={
        "gradient_bound_sq": grad_c, "radicand": radicand,
        "chain_rate": chain_rate, "chain_prefactor": chain_a})


# -- reports ----------------------------------------------------------------

@dataclass
class BoundReport:
    bound_kind: str
    model: str
    grid: np.ndarray
    actual: np.ndarray
    bound: np.ndarray
    constants: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def margin(self):
        return self.bound - self.actual

    @property
    def min_margin(self):
        return float(np.min(self.margin))

    @property
    def dominance(self):
        return bool(np.all(self.margin >= -MARGIN_TOL * (1.0 + np.abs(self.bound))))

    @property
    def passed(self):
        return self.dominance and all(self.checks.values())

    def summary(self):
        return {
            "bound_kind": self.bound_kind,
            "model": self.model,
            "points": int(self.grid.size),
            "min_margin": self.min_margin,
            "max_relative_gap": float(np.max(np.abs(self.margin) / np.maximum(np.abs(self.actual), 1e-300))),
            "constants": dict(self.constants),
            "checks": dict(self.checks),
            "diagnostics": dict(self.diagnostics),
            "pass": self.passed,
        }


def _grid_from(model, grid, lo=None):
    if grid is None:
        grid = numerics.default_grid(model.r_max)
    grid = np.asarray(grid, dtype=float)
    if lo is not None:
        grid = grid[grid >= lo]
        if grid.size == 0 or grid[0] > lo:
            grid = np.concatenate([[lo], grid])
    return model.check_radius(np.unique(grid))


def thm1_5_check(model, grid=None, r0=1.0) -> BoundReport:
    """Vol_f <= b e^{cr} on [r0, r_max] and nonincreasing m_f'/m_f on the grid."""
    consts = thm1_5_constants(model, r0)
    full = _grid_from(model, grid)
    rates = density_log_derivative(model, full)
    steps = np.diff(rates)
    logs = log_density(model, full)
    quotients = np.diff(logs) / np.diff(full)
    concavity = np.diff(quotients)
    g = _grid_from(model, grid, lo=r0)
    actual = weighted_ball_volume(model, g)
    bound = consts.prefactor * np.exp(consts.rate * g)
    return BoundReport(
        "thm1_5", model.name, g, actual, bound,
        constants={"r0": r0, "b": consts.prefactor, "c": consts.rate, "C": consts.C},
        diagnostics={"fallback": consts.fallback,
                     "max_rate_increase": float(steps.max()) if steps.size else 0.0,
                     "max_quotient_increase": float(concavity.max()) if concavity.size else 0.0},
        checks={"density_rate_nonincreasing": bool(steps.size == 0 or steps.max() <= 1e-7),
                "log_density_concave": bool(concavity.size == 0 or concavity.max() <= 1e-7)})


def thm1_6_check(model, grid=None, anchor=1.0) -> BoundReport:
    """Vol <= a e^{br} on [1, r_max], plus the gradient bound and the
    intermediate claim ∫_1^r w <= b r."""
    _thm1_6_hypotheses(model)
    g = _grid_from(model, grid, lo=anchor)
    full = _grid_from(model, grid)
    grad2 = model.f.deriv1(full) ** 2
    grad_c = gradient_bound_constant(model.kind)
    actual = ball_volume(model, g)
    try:
        consts = thm1_6_constants(model, anchor)
    except HypothesisError as exc:
        return BoundReport("thm1_6", model.name, g, actual, np.full_like(actual, np.nan),
                           diagnostics={"error": str(exc)}, checks={"rate_defined": False})
    bound = consts.prefactor * np.exp(consts.rate * g)
    log_j = np.log(model.phi.value(g)) - math.log(float(model.phi.value(np.array([anchor]))[0]))
    chain = consts.extra["chain_prefactor"] * np.exp(consts.extra["chain_rate"] * g)
    return BoundReport(
        "thm1_6", model.name, g, actual, bound,
        constants={"a": consts.prefactor, "b": consts.rate, "C": consts.C},
        diagnostics={"max_grad_sq": float(grad2.max()), "gradient_bound_sq": grad_c,
                     "chain_rate": consts.extra["chain_rate"],
                     "chain_prefactor": consts.extra["chain_prefactor"],
                     "chain_min_margin": float(np.min(chain - actual)),
                     "claim_min_margin": float(np.min(consts.rate * g - log_j))},
        checks={"gradient_bound": bool(grad2.max() <= grad_c * (1 + 1e-12)),
                "log_jacobian_claim": bool(np.all(consts.rate * g - log_j >= -1e-10)),
                "rate_defined": True})


def bound_report(model, kind, grid=None, **options) -> BoundReport:
    """Evaluate bound ``kind`` against the actual volume on ``grid``."""
    if kind not in BOUND_KINDS:
        raise PreconditionError(f"unknown bound kind {kind!r}")
    if kind == "thm1_5":
        return thm1_5_check(model, grid, options.get("r0", 1.0))
    if kind == "thm1_6":
        return thm1_6_check(model, grid, options.get("anchor", 1.0))
    g = _grid_from(model, grid)
    if kind in ("thm1_1", "thm1_7", "cor1_2_infR", "cor1_2_plain"):
        _require_shrinker_type(model)
        if kind == "thm1_7" and not isinstance(model.kind, MetricMeasure):
            raise PreconditionError("thm1_7 needs a metric measure model")
    actual = ball_volume(model, g)
    constants, diagnostics, checks = {}, {}, {}
    if kind in ("thm1_1", "thm1_7"):
        if isinstance(model.kind, MetricMeasure):
            fine, coarse = thm1_7_bound(model, g, grid=g)
            bound = fine
            diagnostics["coarse_min_margin"] = float(np.min(coarse - actual))
            checks["coarse_dominates_fine"] = bool(np.all(coarse - fine >= -MARGIN_TOL * (1 + coarse)))
        else:
            bound = thm1_1_bound(model, g)
    elif kind.startswith("cor1_2"):
        with_inf, plain = cor1_2_bounds(model, g, grid=g)
        bound = with_inf if kind == "cor1_2_infR" else plain
        f0 = float(model.f.value(np.zeros(1))[0])
        constants["f0"] = f0
    else:
        variant = options.get("variant", "statement")
        bound = thm1_3_bound(model, g, variant)
        other = thm1_3_bound(model, g, "proof" if variant == "statement" else "statement")
        constants["variant"] = variant
        diagnostics["other_variant_min_margin"] = float(np.min(other - actual))
    return BoundReport(kind, model.name, g, actual, bound, constants, diagnostics, checks)


__all__ = [
    "BOUND_KINDS", "BoundReport", "ExpBoundConstants", "ball_volume", "bound_report",
    "cor1_2_bounds", "density_log_derivative", "grid_infimum", "sphere_area",
    "thm1_1_bound", "thm1_3_bound", "thm1_5_check", "thm1_5_constants",
    "thm1_6_check", "thm1_6_constants", "thm1_7_bound", "unit_ball_volume",
    "weighted_ball_volume", "INNER_TOL",
]
