"""Rotationally symmetric model geometries.

A pole model is the metric ``dr^2 + phi(r)^2 g_{S^{n-1}}`` on a ball around
a pole, together with a radial potential ``f``.  Every geometric quantity
used elsewhere is a function of ``r`` alone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import numerics
from .errors import DomainError, PreconditionError
from .numerics import POLE_EPS, RadialProfile


POLE_SEGMENT = 0.02
POLE_STEP = 1e-4


class TruncationWarning(UserWarning):
    """The generated warping function vanished before the requested radius."""


@dataclass(frozen=True)
class Shrinker:
    """Normalized gradient shrinking soliton, Ric + Hess f = g/2."""

    lam: float = field(default=0.5, init=False)
    label = "shrinker"


@dataclass(frozen=True)
class MetricMeasure:
    """Smooth metric measure space with Ric_f >= g/2 and |grad f|^2 <= f."""

    lam: float = field(default=0.5, init=False)
    label = "metric_measure"


@dataclass(frozen=True)
class QuasiEinstein:
    """m-quasi-Einstein structure Ric + Hess f - df(x)df/m = lam g."""

    m: float
    lam: float
    mu: float = 0.0
    label = "quasi_einstein"

    def __post_init__(self):
        if self.m == 0:
            raise DomainError("quasi-Einstein structure needs m != 0")


StructureKind = Union[Shrinker, MetricMeasure, QuasiEinstein]


@dataclass(frozen=True)
class PoleModel:
    n: int
    phi: RadialProfile
    f: RadialProfile
    kind: StructureKind
    r_max: float
    name: str = ""
    truncated: bool = False
    ode_error: float = 0.0
    radial_only: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("dimension must be an integer >= 2")
        if not self.r_max > 0:
            raise DomainError("r_max must be positive")
        if self.r_max > min(self.phi.r_max, self.f.r_max) * (1 + 1e-12):
            raise DomainError("r_max exceeds the domain of the profiles")
        if isinstance(self.kind, QuasiEinstein) and self.kind.lam > 0:
            raise PreconditionError(
                "quasi-Einstein pole models with lam > 0 are compact; not supported")

    @property
    def is_shrinker_type(self):
        return isinstance(self.kind, (Shrinker, MetricMeasure))

    @property
    def is_qe(self):
        return isinstance(self.kind, QuasiEinstein)

    def check_radius(self, r, allow_zero=False):
        r = np.asarray(r, dtype=float)
        lo_ok = r >= 0 if allow_zero else r > 0
        if not np.all(lo_ok) or np.any(r > self.r_max * (1 + 1e-12)):
            raise DomainError(f"radius outside (0, {self.r_max}] for model {self.name!r}")
        return r

    def with_r_max(self, r_max):
        """Same geometry on a different ball; limited by the profile domains."""
        return replace(self, r_max=float(r_max))


@dataclass(frozen=True)
class ProductModel:
    """Line (or half line) times an Einstein fiber, potential on the line."""

    fiber_dim: int
    fiber_einstein_const: float
    f_line: RadialProfile
    kind: StructureKind
    name: str = ""

    @property
    def n(self):
        return 1 + self.fiber_dim


def _log_cosh(t):
    t = np.abs(t)
    return t + np.log1p(np.exp(-2.0 * t)) - math.log(2.0)


def gaussian_soliton(n, r_max=10.0, kind=None):
    """Flat R^n with f = r^2/4; ``kind=MetricMeasure()`` views it as the
    equality case of the metric measure hypotheses."""
    phi = RadialProfile.polynomial([0.0, 1.0])
    f = RadialProfile.polynomial([0.0, 0.0, 0.25])
    kind = Shrinker() if kind is None else kind
    return PoleModel(n, phi, f, kind, float(r_max), name=f"gaussian(n={n})")


def hyperbolic_qe(n, m, r_max=10.0, C=None):
    """Hyperbolic space with f = C log cosh r; C = -m makes it quasi-Einstein
    with lam = -(n-1+m) and mu = 1-m."""
    if not m > 1:
        raise DomainError("hyperbolic_qe needs m > 1")
    C = -float(m) if C is None else float(C)
    phi = RadialProfile.closed_form(np.sinh, np.cosh, np.sinh, label="sinh")
    f = RadialProfile.closed_form(
        lambda r: C * _log_cosh(r),
        lambda r: C * np.tanh(r),
        lambda r: C / np.cosh(r) ** 2,
        label=f"{C!r}*log(cosh)")
    kind = QuasiEinstein(float(m), -(n - 1 + m), 1.0 - m)
    return PoleModel(n, phi, f, kind, float(r_max), name=f"hyperbolic_qe(n={n},m={m})")


def ricci_flat_product_qe(m, c, fiber_dim=2):
    """[0, inf) x (Ricci-flat fiber) with f = -m log(c t): lam = 0, mu = (m-1)c^2."""
    if not m > 1 or not c > 0:
        raise DomainError("product_qe needs m > 1 and c > 0")
    m, c = float(m), float(c)
    f = RadialProfile.closed_form(
        lambda t: -m * np.log(c * t),
        lambda t: -m / t,
        lambda t: m / t**2,
        label=f"-{m!r}*log({c!r}t)")
    kind = QuasiEinstein(m, 0.0, (m - 1.0) * c * c)
    return ProductModel(int(fiber_dim), 0.0, f, kind, name=f"product_qe(m={m},c={c})")


def flat_trivial(n=3, r_max=10.0, m=2.0, f0=0.0):
    """Euclidean space with constant potential, a trivial lam = 0 quasi-Einstein model."""
    return PoleModel(n, RadialProfile.polynomial([0.0, 1.0]), RadialProfile.constant(f0),
                     QuasiEinstein(float(m), 0.0, 0.0), float(r_max),
                     name=f"flat(n={n},f={f0})")


def radial_coefficient(n, f, kind):
    """k(r) with phi'' = k(r) phi, from the radial component of the structure equation."""
    if isinstance(kind, QuasiEinstein):
        m, lam = kind.m, kind.lam

        def k(r):
            return (f.deriv2(r) - f.deriv1(r) ** 2 / m - lam) / (n - 1)
    else:
        def k(r):
            return (f.deriv2(r) - 0.5) / (n - 1)
    return k


def generate_from_potential(n, f, kind, r_max, h=2e-3, name=""):
    """Integrate the radial structure equation for phi from the pole.

    Only the radial component of the soliton / quasi-Einstein equation is
    enforced.  If phi reaches zero first, the model is truncated at the
    last mesh node before the zero and a :class:`TruncationWarning` is issued.
    """
    if int(n) != n or n < 2:
        raise DomainError("dimension must be an integer >= 2")
    slope0 = float(f.deriv1(np.zeros(1))[0])
    if abs(slope0) > 1e-12:
        raise PreconditionError(f"potential must satisfy f'(0) = 0, got {slope0!r}")
    if r_max > f.r_max:
        raise DomainError("r_max exceeds the potential's domain")
    k = radial_coefficient(n, f, kind)
    # a fine first stretch keeps interpolation error in phi' far below
    # phi^2 ~ r^2, which divides it in the tangential curvature
    split = min(POLE_SEGMENT, float(r_max))
    segments = [(POLE_EPS, split, POLE_STEP)]
    if r_max > split:
        segments.append((split, float(r_max), h))
    # Taylor seed phi = r + k(0) r^3/6, phi' = 1 + k(0) r^2/2 at r = eps
    k0 = float(k(np.zeros(1))[0])
    state = np.array([POLE_EPS + k0 * POLE_EPS**3 / 6.0, 1.0 + k0 * POLE_EPS**2 / 2.0])
    r_parts, y_parts, error, stopped = [], [], 0.0, False
    for lo, hi, step in segments:
        count = max(1, int(math.ceil((hi - lo) / step - 1e-9)))
        step = (hi - lo) / count
        k_at = numerics.lattice_lookup(k, lo, hi, step / 4.0)

        def rhs(r, y, k_at=k_at):
            return np.array([y[1], k_at(r) * y[0]])

        part = numerics.solve_ivp(rhs, state, (lo, hi), step, stop=lambda r, y: y[0] <= 0.0)
        skip = 1 if r_parts else 0
        r_parts.append(part.r[skip:])
        y_parts.append(part.y[skip:])
        error = max(error, part.error)
        stopped = part.stopped
        if stopped:
            break
        state = part.y[-1]
    traj = numerics.Trajectory(np.concatenate(r_parts), np.concatenate(y_parts), error, stopped)
    rs = np.concatenate([[0.0], traj.r])
    ys = np.concatenate([[0.0], traj.y[:, 0]])
    dys = np.concatenate([[1.0], traj.y[:, 1]])
    top = float(rs[-1])
    truncated = traj.stopped
    if truncated:
        warnings.warn(f"warping function vanishes near r={top:.6g}; model truncated",
                      TruncationWarning, stacklevel=2)

    def ddy(r, y, dy):
        return k(np.asarray(r, dtype=float)) * y

    phi = RadialProfile.hermite(rs, ys, dys, ddy, r_max=top, label="generated")
    return PoleModel(n, phi, f, kind, top, name=name or f"generated(n={n})",
                     truncated=truncated, ode_error=traj.error, radial_only=True)


# Built-in generated models -------------------------------------------------

def _bump(a, width):
    """a * r^2 exp(-r^2/width^2): even, f'(0) = 0."""
    w2 = width * width

    def v(r):
        return a * r * r * np.exp(-r * r / w2)

    def d1(r):
        return a * np.exp(-r * r / w2) * (2 * r - 2 * r**3 / w2)

    def d2(r):
        e = np.exp(-r * r / w2)
        return a * e * (2 - 10 * r * r / w2 + 4 * r**4 / w2**2)

    return v, d1, d2


def perturbed_gaussian(a, width, offset, eps=0.0, label=None):
    """Potential (1/4 + eps) r^2 + offset + a r^2 exp(-r^2/width^2)."""
    bv, b1, b2 = _bump(a, width)
    q = 0.25 + eps
    return RadialProfile.closed_form(
        lambda r: q * r * r + offset + bv(r),
        lambda r: 2 * q * r + b1(r),
        lambda r: 2 * q + b2(r),
        label=label or f"{q}r^2+{offset}+{a}r^2exp(-r^2/{width}^2)")


def log_potential(a, offset=0.0):
    """offset + a log(1 + r^2)."""
    return RadialProfile.closed_form(
        lambda r: offset + a * np.log1p(r * r),
        lambda r: 2 * a * r / (1 + r * r),
        lambda r: 2 * a * (1 - r * r) / (1 + r * r) ** 2,
        label=f"{offset}+{a}log(1+r^2)")


def rational_potential(a, offset=0.0):
    """offset + a r^2 / (1 + r^2)."""
    return RadialProfile.closed_form(
        lambda r: offset + a * r * r / (1 + r * r),
        lambda r: 2 * a * r / (1 + r * r) ** 2,
        lambda r: 2 * a * (1 - 3 * r * r) / (1 + r * r) ** 3,
        label=f"{offset}+{a}r^2/(1+r^2)")


def hyperbolic_space(n, r_max=10.0, m=2.0):
    """Hyperbolic space with f = 0: Einstein, hence quasi-Einstein with
    lam = mu = -(n-1) for every m."""
    phi = RadialProfile.closed_form(np.sinh, np.cosh, np.sinh, label="sinh")
    lam = -(n - 1.0)
    return PoleModel(n, phi, RadialProfile.constant(0.0), QuasiEinstein(float(m), lam, lam),
                     float(r_max), name=f"hyperbolic(n={n})")


# (n, eps, a, width, offset); each passes Ric_f >= g/2 and |grad f|^2 <= f on (0, 10]
PERTURBED_GAUSSIANS = {
    "pg_n3_plain": (3, 0.05, 0.0, 1.0, 6.5),
    "pg_n3_bump": (3, 0.05, 0.1, 1.0, 6.5),
    "pg_n3_wide": (3, 0.05, 0.02, 2.5, 6.5),
    "pg_n2_bump": (2, 0.05, 0.02, 1.0, 6.5),
    "pg_n5_wide": (5, 0.05, 0.1, 2.5, 6.5),
    "pg_n4_mid": (4, 0.02, 0.05, 1.5, 3.0),
}

# (n, m, potential family, a, offset) for lam = 0 quasi-Einstein models
FLAT_QE_MODELS = {
    "qe_log_n3": (3, 4.0, "log", 1.0, 0.0),
    "qe_log_n4": (4, 2.0, "log", 0.3, 1.0),
    "qe_rat_n3": (3, 2.0, "rational", 1.0, 2.0),
    "qe_log_n2": (2, 2.0, "log", 0.5, 0.0),
}

_FAMILIES = {"log": log_potential, "rational": rational_potential}


def generated_model(key, r_max=10.0):
    """Built-in ODE-generated model by catalog key (``flat`` included)."""
    if key == "flat":
        return flat_trivial(3, r_max)
    if key in PERTURBED_GAUSSIANS:
        n, eps, a, width, offset = PERTURBED_GAUSSIANS[key]
        f = perturbed_gaussian(a, width, offset, eps)
        return generate_from_potential(n, f, MetricMeasure(), r_max, name=key)
    if key in FLAT_QE_MODELS:
        n, m, family, a, offset = FLAT_QE_MODELS[key]
        f = _FAMILIES[family](a, offset)
        return generate_from_potential(n, f, QuasiEinstein(m, 0.0), r_max, name=key)
    raise DomainError(f"unknown generated model {key!r}")


def generated_keys():
    return ["flat", *PERTURBED_GAUSSIANS, *FLAT_QE_MODELS]


# Model documents ------------------------------------------------------------

def _potential_from_document(spec):
    if not isinstance(spec, dict):
        raise DomainError("potential must be an object")
    form = spec.get("form")
    if form == "poly":
        coeffs = spec.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise DomainError("poly potential needs a non-empty 'coeffs' list")
        return RadialProfile.polynomial([float(c) for c in coeffs])
    if form == "table":
        return RadialProfile.table(spec.get("r"), spec.get("f"))
    raise DomainError(f"unknown potential form {form!r}")


def _structure_from_document(doc):
    structure = doc.get("structure", "shrinker")
    if structure == "shrinker":
        return Shrinker()
    if structure == "metric_measure":
        return MetricMeasure()
    if structure == "quasi_einstein":
        return QuasiEinstein(float(doc.get("m", 2.0)), float(doc.get("lam", 0.0)),
                             float(doc.get("mu", 0.0)))
    raise DomainError(f"unknown structure {structure!r}")


def model_from_document(doc):
    """Build a model from a JSON-style document.

    ``{"kind": "gaussian"|"hyperbolic_qe"|"product_qe"|"generated", "n": int,
    "m": num, "c": num, "r_max": num, "potential": {"form": "poly"|"table", ...}}``;
    generated models also accept ``"structure"`` and, for quasi-Einstein,
    ``"m"``, ``"lam"``, ``"mu"``.  Any malformed field raises ``DomainError``.
    """
    if not isinstance(doc, dict):
        raise DomainError("model document must be a JSON object")
    kind = doc.get("kind")
    try:
        r_max = float(doc.get("r_max", 10.0))
        if kind == "gaussian":
            structure = MetricMeasure() if doc.get("structure") == "metric_measure" else None
            return gaussian_soliton(int(doc.get("n", 3)), r_max, structure)
        if kind == "hyperbolic_qe":
            C = doc.get("C")
            return hyperbolic_qe(int(doc.get("n", 3)), float(doc.get("m", 2.0)), r_max,
                                 None if C is None else float(C))
        if kind == "product_qe":
            return ricci_flat_product_qe(float(doc.get("m", 2.0)), float(doc.get("c", 1.0)),
                                         int(doc.get("fiber_dim", 2)))
        if kind == "generated":
            if "potential" not in doc:
                raise DomainError("generated model needs a 'potential'")
            f = _potential_from_document(doc["potential"])
            return generate_from_potential(int(doc.get("n", 3)), f, _structure_from_document(doc),
                                           min(r_max, f.r_max), name=str(doc.get("name", "")))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"malformed model document: {exc}") from exc
    raise DomainError(f"unknown model kind {kind!r}")
