"""Riccati/Jacobian comparison along radial geodesics.

For a pole model the Jacobian is J = phi exactly, so each comparison
inequality can be tested against the true value rather than an estimate.
"""

from __future__ import annotations

import numpy as np

from . import numerics
from .curvature import ricci_radial, scalar_curvature
from .errors import PreconditionError
from .models import MetricMeasure, QuasiEinstein, Shrinker

INNER_TOL = 1e-12


def riccati_defect(model, r):
    """w' + w^2 + Ric(∂r,∂r)/(n-1) with w = phi'/phi; zero for warped products."""
    r = model.check_radius(np.atleast_1d(r))
    phi, d1, d2 = model.phi.value(r), model.phi.deriv1(r), model.phi.deriv2(r)
    w = d1 / phi
    w_prime = d2 / phi - w * w
    return w_prime + w * w + ricci_radial(model, r) / (model.n - 1)


def log_jacobian_bound(model, r):
    """Upper bound for log(J/r) from integrating the Riccati inequality twice:

    ((1/r) ∫_0^r s^2 Ric ds - ∫_0^r s Ric ds) / (n - 1).
    """
    r = model.check_radius(np.atleast_1d(r))
    s2, _ = numerics.integrate_many(lambda s: s * s * ricci_radial(model, s), 0.0, r, INNER_TOL)
    s1, _ = numerics.integrate_many(lambda s: s * ricci_radial(model, s), 0.0, r, INNER_TOL)
    return (s2 / r - s1) / (model.n - 1)


def comparison_integrand(model):
    """The function averaged in the shrinker-type Jacobian bound: R for
    shrinkers, f - |∇f|^2 for metric measure spaces."""
    if isinstance(model.kind, Shrinker):
        return lambda s: scalar_curvature(model, s)
    if isinstance(model.kind, MetricMeasure):
        return lambda s: model.f.value(s) - model.f.deriv1(s) ** 2
    raise PreconditionError("shrinker-type bound needs a Shrinker or MetricMeasure model")


def shrinker_log_factor(model):
    """t -> f(0) - (1/t) ∫_0^t G for t >= 0, the exponent of the Jacobian bound."""
    F = numerics.Antiderivative(comparison_integrand(model), model.r_max, INNER_TOL)
    f0 = float(model.f.value(np.zeros(1))[0])
    return lambda t: f0 - F.average(t)


def shrinker_jacobian_bound(model, r):
    """Bound for J(r)^{n-1}: exp(f(0) - (1/r) ∫_0^r G) r^{n-1}."""
    r = model.check_radius(np.atleast_1d(r))
    return np.exp(shrinker_log_factor(model)(r)) * r ** (model.n - 1)


def _require_flat_qe(model):
    kind = model.kind
    if not isinstance(kind, QuasiEinstein) or kind.lam != 0:
        raise PreconditionError("bound applies to quasi-Einstein models with lam = 0")


def qe_phi(model, variant="statement"):
    """t -> Phi(t) = f(t) ± f(0) - (2/t) ∫_0^t f.

    ``variant="statement"`` uses +f(0), which is what the integrated chain
    produces; ``"proof"`` uses -f(0) as in the final display of the
    derivation.  At t = 0 the statement variant is 0.
    """
    _require_flat_qe(model)
    if variant not in ("statement", "proof"):
        raise ValueError(f"unknown Phi variant {variant!r}")
    F = numerics.Antiderivative(model.f.value, model.r_max, INNER_TOL)
    f0 = float(model.f.value(np.zeros(1))[0])
    sign = 1.0 if variant == "statement" else -1.0
    return lambda t: model.f.value(t) + sign * f0 - 2.0 * F.average(t)


def qe_jacobian_bound(model, r, variant="statement"):
    """Bound for J(r)^{n-1} on a lam = 0 quasi-Einstein model: e^Phi r^{n-1}."""
    r = model.check_radius(np.atleast_1d(r))
    return np.exp(qe_phi(model, variant)(r)) * r ** (model.n - 1)


def jacobian_power(model, r):
    """The exact J(r)^{n-1} = phi(r)^{n-1}."""
    r = model.check_radius(np.atleast_1d(r))
    return model.phi.value(r) ** (model.n - 1)
