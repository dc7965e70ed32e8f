"""Pointwise curvature of pole models and structure-equation residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .models import PoleModel, ProductModel, QuasiEinstein, Shrinker

NEAR_POLE = 2e-3
_EXTRAP_R = (2e-3, 4e-3, 6e-3)


@dataclass(frozen=True)
class CurvatureSample:
    r: np.ndarray
    ric_rad: np.ndarray
    ric_tan: np.ndarray
    R: np.ndarray
    J: np.ndarray
    w: np.ndarray


def _pole_safe(raw, r, near_pole=NEAR_POLE):
    """Evaluate an even quantity with a 0/0 at the pole.

    Terms like (1 - phi'^2)/phi^2 lose about eps/r^2 to cancellation, so
    inside ``near_pole`` the value is the quadratic in r^2 through three
    samples just outside it (rounding about 1e-10, truncation O(r^6)).
    """
    out = np.empty_like(r)
    near = r < near_pole
    out[~near] = raw(r[~near])
    if np.any(near):
        nodes = np.asarray(_EXTRAP_R) ** 2
        vals = raw(np.asarray(_EXTRAP_R))
        s = r[near] ** 2
        acc = np.zeros_like(s)
        for i in range(3):
            basis = np.ones_like(s)
            for j in range(3):
                if j != i:
                    basis *= (s - nodes[j]) / (nodes[i] - nodes[j])
            acc += vals[i] * basis
        out[near] = acc
    return out


def _radial_curvatures(model, r):
    """(-phi''/phi, (1 - phi'^2)/phi^2) for r >= 0, pole included."""
    phi = model.phi

    def sec_rad(s):
        return -phi.deriv2(s) / phi.value(s)

    def sec_tan(s):
        return (1.0 - phi.deriv1(s) ** 2) / phi.value(s) ** 2

    # phi''/phi has no cancellation; only r = 0 itself needs the limit
    return _pole_safe(sec_rad, r, near_pole=1e-300), _pole_safe(sec_tan, r)


def ricci_radial(model, r):
    """Ric(∂r, ∂r) for r >= 0 (pole value by extrapolation)."""
    r = np.asarray(r, dtype=float)
    a, _ = _radial_curvatures(model, r.ravel())
    return ((model.n - 1) * a).reshape(r.shape)


def scalar_curvature(model, r):
    """Scalar curvature for r >= 0 (pole value by extrapolation)."""
    r = np.asarray(r, dtype=float)
    n = model.n
    a, t = _radial_curvatures(model, r.ravel())
    return (2 * (n - 1) * a + (n - 1) * (n - 2) * t).reshape(r.shape)


def curvature_at(model: PoleModel, r) -> CurvatureSample:
    """Radial and tangential Ricci curvature, scalar curvature, J and w = J'/J."""
    r = np.atleast_1d(model.check_radius(r)).astype(float)
    n = model.n
    phi, dphi = model.phi.value(r), model.phi.deriv1(r)
    a, t = _radial_curvatures(model, r)
    ric_rad = (n - 1) * a
    ric_tan = a + (n - 2) * t
    R = 2 * (n - 1) * a + (n - 1) * (n - 2) * t
    return CurvatureSample(r, ric_rad, ric_tan, R, phi, dphi / phi)


def laplacian_f(model, r):
    """Delta f = f'' + (n-1) (phi'/phi) f' for a radial potential."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return model.f.deriv2(r) + (model.n - 1) * model.phi.deriv1(r) / model.phi.value(r) * model.f.deriv1(r)


def hamilton_identity_residuals(model: PoleModel, r):
    """Residuals of R + Δf = n/2, R + |∇f|² = f and Δf - |∇f|² + f = n/2."""
    if not isinstance(model.kind, Shrinker):
        raise PreconditionError("Hamilton identities apply to shrinking solitons only")
    c = curvature_at(model, r)
    n = model.n
    lap = laplacian_f(model, c.r)
    grad2 = model.f.deriv1(c.r) ** 2
    f = model.f.value(c.r)
    return (c.R + lap - n / 2.0,
            c.R + grad2 - f,
            lap - grad2 + f - n / 2.0)


def _qe_parts(model, r, m):
    """Components of Ric + Hess f - df⊗df/m (no lam), plus R, n, f, f'."""
    if isinstance(model, ProductModel):
        t = np.atleast_1d(np.asarray(r, dtype=float))
        f, d1, d2 = model.f_line.value(t), model.f_line.deriv1(t), model.f_line.deriv2(t)
        # the line is flat and f is constant along the fiber
        rad = d2 - d1**2 / m
        tan = np.full_like(t, model.fiber_einstein_const)
        R = np.full_like(t, model.fiber_dim * model.fiber_einstein_const)
    else:
        c = curvature_at(model, r)
        t, R = c.r, c.R
        f, d1, d2 = model.f.value(t), model.f.deriv1(t), model.f.deriv2(t)
        rad = c.ric_rad + d2 - d1**2 / m
        tan = c.ric_tan + c.w * d1
    return rad, tan, R, model.n, f, d1


def _mu_expression(R, n, f, d1, m, lam):
    u = np.exp(-f / m)
    grad_u2 = (u * d1 / m) ** 2
    return u * u / m * (R - lam * n) + (m - 1) * grad_u2 + lam * u * u


def qe_residuals(model, r, normalized=False):
    """Radial, tangential and mu residuals of the quasi-Einstein structure.

    ``mu_res`` uses u = exp(-f/m):
    (u^2/m)(R - lam n) + (m-1)|∇u|^2 + lam u^2 - mu.
    With ``normalized`` it is divided by u^2.  The raw form carries
    cancellation error of order eps * u^2, which dominates where u is large.
    """
    kind = model.kind
    if not isinstance(kind, QuasiEinstein):
        raise PreconditionError("quasi-Einstein residuals need a quasi-Einstein model")
    m, lam, mu = kind.m, kind.lam, kind.mu
    rad, tan, R, n, f, d1 = _qe_parts(model, r, m)
    mu_res = _mu_expression(R, n, f, d1, m, lam) - mu
    if normalized:
        mu_res = mu_res * np.exp(2.0 * f / m)
    return rad - lam, tan - lam, mu_res


def recover_qe_constants(model, r, m=None):
    """Read (lam, mu) off the structure equations on a grid.

    lam is the mean of the radial and tangential components of
    Ric + Hess f - df⊗df/m; mu is the mean of the left side of the
    u-equation at that lam.  The returned spread is the largest deviation
    from those values (the mu part divided by u^2); it vanishes exactly when
    the model is quasi-Einstein with some constants.
    """
    if m is None:
        if not isinstance(model.kind, QuasiEinstein):
            raise PreconditionError("pass m for a model without quasi-Einstein kind")
        m = model.kind.m
    rad, tan, R, n, f, d1 = _qe_parts(model, r, m)
    comps = np.concatenate([rad, tan])
    lam = float(np.mean(comps))
    mu_vals = _mu_expression(R, n, f, d1, m, lam)
    # weight by u^-4: samples with large u pin mu down poorly
    weight = np.exp(4.0 * f / m)
    mu = float(np.sum(weight * mu_vals) / np.sum(weight))
    spread_mu = np.max(np.abs(mu_vals - mu) * np.exp(2.0 * f / m))
    spread = float(max(np.max(np.abs(comps - lam)), spread_mu))
    return lam, mu, spread


def weighted_laplacian_identity_gap(model, r):
    """|(Δf - |∇f|²) - (m lam - m mu e^{2f/m})| on a grid."""
    kind = model.kind
    m, lam, mu = kind.m, kind.lam, kind.mu
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lhs = laplacian_f(model, r) - model.f.deriv1(r) ** 2
    rhs = m * lam - m * mu * np.exp(2.0 * model.f.value(r) / m)
    return np.abs(lhs - rhs)


@dataclass(frozen=True)
class HypothesisReport:
    """Pointwise check of Ric_f >= g/2 and |∇f|^2 <= f on a grid.

    Margins follow the convention ``margin >= 0`` means the inequality
    holds.  For shrinkers the two Bakry-Emery margins are also the
    residuals of the soliton equation.
    """

    model: str
    r: np.ndarray
    ric_f_rad: np.ndarray
    ric_f_tan: np.ndarray
    gradient_margin: np.ndarray
    R: np.ndarray
    envelope_c: float
    tol: float
    hamilton: tuple | None = None

    @property
    def rad_margin(self):
        return self.ric_f_rad - 0.5

    @property
    def tan_margin(self):
        return self.ric_f_tan - 0.5

    @property
    def ric_f_ok(self):
        return bool(min(self.rad_margin.min(), self.tan_margin.min()) >= -self.tol)

    @property
    def gradient_ok(self):
        return bool(self.gradient_margin.min() >= -self.tol)

    @property
    def passed(self):
        return self.ric_f_ok and self.gradient_ok

    def worst(self):
        """Most negative margin per check, with the radius where it occurs."""
        out = {}
        for name, vals in (("ric_f_rad", self.rad_margin), ("ric_f_tan", self.tan_margin),
                           ("f_minus_grad2", self.gradient_margin)):
            i = int(np.argmin(vals))
            out[name] = (float(vals[i]), float(self.r[i]))
        if self.hamilton is not None:
            for k, res in enumerate(self.hamilton, start=1):
                i = int(np.argmax(np.abs(res)))
                out[f"hamilton_{k}"] = (float(res[i]), float(self.r[i]))
        return out


def potential_envelope_constant(r, f, coeff=0.5):
    """Smallest c >= 0 with coeff(r-c)^2 <= f <= coeff(r+c)^2 on the samples.

    Returns nan when f < 0 somewhere, since no envelope of that shape exists.
    """
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        return float("nan")
    root = np.sqrt(f / coeff)
    return float(max(0.0, np.max(r - root), np.max(root - r)))


def verify_hypotheses(model: PoleModel, grid, tol=1e-9) -> HypothesisReport:
    """Evaluate the Bakry-Emery and gradient hypotheses on ``grid``."""
    c = curvature_at(model, grid)
    r = c.r
    f, d1, d2 = model.f.value(r), model.f.deriv1(r), model.f.deriv2(r)
    ric_f_rad = c.ric_rad + d2
    ric_f_tan = c.ric_tan + c.w * d1
    hamilton = None
    if isinstance(model.kind, Shrinker):
        hamilton = hamilton_identity_residuals(model, r)
    return HypothesisReport(model.name, r, ric_f_rad, ric_f_tan, f - d1**2, c.R,
                            potential_envelope_constant(r, f), tol, hamilton)
