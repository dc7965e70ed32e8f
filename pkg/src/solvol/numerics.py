"""Quadrature, fixed-step Runge-Kutta integration and radial profiles.

Every other module funnels its integrals through :func:`integrate_many`,
a batched adaptive Simpson rule.  Integrands are called with 1-d numpy
arrays of abscissae; plain scalar callables are accepted and looped over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import ConvergenceError, DivergenceError, DomainError

DEFAULT_TOL = 1e-10
MAX_PANELS = 2**20
INITIAL_PANELS = 8
POLE_EPS = 1e-6


def _evaluate(p, x):
    x = np.asarray(x, dtype=float)
    try:
        vals = np.asarray(p(x), dtype=float)
    except TypeError:
        vals = None
    if vals is None or vals.shape != x.shape:
        if vals is not None and vals.ndim == 0:
            vals = np.full(x.shape, float(vals))
        else:
            vals = np.array([float(p(xi)) for xi in x.ravel()]).reshape(x.shape)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)]
        raise DomainError(f"integrand is not finite at s={bad.flat[0]!r}")
    return vals


def integrate_many(p, a, b, tol=DEFAULT_TOL, max_panels=MAX_PANELS, relative=False):
    """Adaptive composite Simpson over many intervals at once.

    Returns ``(values, errors)``.  Each interval is refined independently,
    with its own cap of ``max_panels`` panels,
    until the summed error estimate satisfies ``err <= tol * (1 + |value|)``,
    using the coarse-level value as the scale.  With ``relative`` the
    target is ``err <= tol * |value|`` instead (intervals whose coarse value
    is exactly zero keep the mixed target); this is meant for integrands
    of one sign whose integrals may be far below 1.  Panels are processed
    in batches so the integrand sees large arrays.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    a = a.ravel()
    b = b.ravel()
    if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
        raise DomainError("integration limits must be finite")
    if np.any(b < a):
        raise DomainError("integration requires a <= b")
    k = a.size
    values = np.zeros(k)
    errors = np.zeros(k)
    live = np.flatnonzero(b > a)
    if live.size == 0:
        return values, errors

    width = b - a
    frac = (np.arange(INITIAL_PANELS + 1) / INITIAL_PANELS)[None, :]
    edges = a[live, None] + width[live, None] * frac
    lo = edges[:, :-1].ravel()
    hi = edges[:, 1:].ravel()
    owner = np.repeat(live, INITIAL_PANELS)
    mid = 0.5 * (lo + hi)
    f_lo = _evaluate(p, lo)
    f_mid = _evaluate(p, mid)
    f_hi = _evaluate(p, hi)
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)

    scale = np.zeros(k)
    np.add.at(scale, owner, whole)
    if relative:
        scale = np.where(scale != 0.0, np.abs(scale), 1.0)
    else:
        scale = 1.0 + np.abs(scale)

    panels = np.zeros(k, dtype=np.int64)
    panels[live] = INITIAL_PANELS
    while owner.size:
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        f_q1 = _evaluate(p, q1)
        f_q3 = _evaluate(p, q3)
        h = hi - lo
        left = h / 12.0 * (f_lo + 4.0 * f_q1 + f_mid)
        right = h / 12.0 * (f_mid + 4.0 * f_q3 + f_hi)
        diff = left + right - whole
        allowed = 15.0 * tol * scale[owner] * h / width[owner]
        done = np.abs(diff) <= allowed
        if np.any(done):
            np.add.at(values, owner[done], (left + right + diff / 15.0)[done])
            np.add.at(errors, owner[done], np.abs(diff[done]) / 15.0)
        keep = ~done
        if not np.any(keep):
            break
        np.add.at(panels, owner[keep], 1)
        if panels.max() > max_panels:
            raise ConvergenceError(
                f"adaptive Simpson exceeded {max_panels} panels")
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        f_lo, f_mid, f_hi = f_lo[keep], f_mid[keep], f_hi[keep]
        q1, q3, f_q1, f_q3 = q1[keep], q3[keep], f_q1[keep], f_q3[keep]
        left, right, owner = left[keep], right[keep], owner[keep]
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([mid, hi])
        f_lo, f_hi = np.concatenate([f_lo, f_mid]), np.concatenate([f_mid, f_hi])
        mid = np.concatenate([q1, q3])
        f_mid = np.concatenate([f_q1, f_q3])
        whole = np.concatenate([left, right])
        owner = np.concatenate([owner, owner])
    return values, errors


def integrate(p, a, b, tol=DEFAULT_TOL):
    """Adaptive Simpson integral of ``p`` over ``[a, b]``."""
    values, _ = integrate_many(p, a, b, tol)
    return float(values[0])


def integrate_with_error(p, a, b, tol=DEFAULT_TOL):
    values, errors = integrate_many(p, a, b, tol)
    return float(values[0]), float(errors[0])


def cumulative_integral(p, grid, tol=DEFAULT_TOL, start=0.0):
    """``∫_start^r p`` for every r of an increasing grid (additive panels)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size and grid[0] < start:
        raise DomainError("grid must start at or after the lower limit")
    if np.any(np.diff(grid) < 0):
        raise DomainError("grid must be nondecreasing")
    left = np.concatenate([[start], grid[:-1]])
    pieces, _ = integrate_many(p, left, grid, tol)
    return np.cumsum(pieces)


def average_integral(p, t, tol=DEFAULT_TOL):
    """Mean value ``(1/t) ∫_0^t p``; the limit ``p(0)`` at ``t = 0``.

    Computed as ``∫_0^1 p(t u) du`` so that no width or value is divided
    by ``t``; this stays accurate for arbitrarily small ``t``.
    """
    t = float(t)
    if not t >= 0:
        raise DomainError("average_integral requires t >= 0")
    if t == 0:
        return float(_evaluate(p, np.zeros(1))[0])
    return integrate(lambda u: p(t * u), 0.0, 1.0, tol)


def average_integrals(p, t, tol=DEFAULT_TOL):
    """:func:`average_integral` over an array of radii."""
    t = np.asarray(t, dtype=float)
    out = [average_integral(p, x, tol) for x in t.ravel()]
    return np.asarray(out, dtype=float).reshape(t.shape)


class Antiderivative:
    """Smooth representation of ``F(t) = ∫_0^t p`` on ``[0, upper]``.

    Node values come from adaptive Simpson on each mesh cell; between nodes
    F is the cubic Hermite interpolant with the exact slopes ``p(node)``.
    Nested averages built from a fresh adaptive integral per radius are
    non-smooth in t at the level of the tolerance, which stalls an outer
    adaptive rule; this representation is C^1 and accurate to O(h^4).
    """

    def __init__(self, p, upper, tol=DEFAULT_TOL, nodes=4097):
        if not upper > 0:
            raise DomainError("antiderivative needs a positive upper limit")
        self.upper = float(upper)
        x = np.linspace(0.0, self.upper, nodes)
        pieces, _ = integrate_many(p, x[:-1], x[1:], tol)
        values = np.concatenate([[0.0], np.cumsum(pieces)])
        slopes = _evaluate(p, x)
        self._first = float(x[1])
        self._spline = CubicHermiteSpline(x, values, slopes)
        # F(0) = 0, so on the first cell F(t)/t is the quadratic below
        c = self._spline.c[:, 0]
        self._head = (float(c[0]), float(c[1]), float(c[2]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.upper * (1 + 1e-12)):
            raise DomainError("antiderivative evaluated outside its range")
        return self._spline(np.minimum(t, self.upper))

    def average(self, t):
        """``F(t)/t``, continued by ``p(0)`` at ``t = 0``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("antiderivative evaluated outside its range")
        c0, c1, c2 = self._head
        near = (c0 * t + c1) * t + c2
        safe = np.where(t >= self._first, t, 1.0)
        return np.where(t >= self._first, self(safe) / safe, near)


def composite_simpson(p, a, b, panels):
    """Non-adaptive composite Simpson rule with ``panels`` panels."""
    if panels < 1:
        raise DomainError("need at least one panel")
    x = np.linspace(a, b, 2 * panels + 1)
    y = _evaluate(p, x)
    h = (b - a) / (2 * panels)
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


@dataclass(frozen=True)
class Trajectory:
    r: np.ndarray
    y: np.ndarray
    error: float = math.nan
    stopped: bool = False

    def __len__(self):
        return self.r.size


def _rk4(rhs, y0, r0, r1, steps, guard, stop):
    h = (r1 - r0) / steps
    rs = r0 + h * np.arange(steps + 1)
    rs[-1] = r1
    ys = np.empty((steps + 1, y0.size))
    ys[0] = y = y0
    for i in range(steps):
        r = rs[i]
        k1 = rhs(r, y)
        k2 = rhs(r + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(r + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(r + h, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > guard:
            raise DivergenceError(f"solution exceeded {guard:g} near r={rs[i + 1]:.6g}")
        if stop is not None and stop(rs[i + 1], y):
            return rs[: i + 1], ys[: i + 1], True
        ys[i + 1] = y
    return rs, ys, False


def lattice_lookup(fn, r0, r1, q):
    """Scalar evaluator for ``fn`` that serves lattice points ``r0 + i*q``
    from a table built with one vectorized call; other radii call ``fn``."""
    count = int(math.ceil((r1 - r0) / q)) + 3
    nodes = r0 + q * np.arange(count)
    table = np.asarray(fn(nodes), dtype=float)

    def lookup(r):
        x = (r - r0) / q
        i = int(round(x))
        if 0 <= i < count and abs(x - i) < 1e-6:
            return table[i]
        return float(fn(np.array([r]))[0])

    return lookup


def solve_ivp(rhs, y0, span, h, guard=1e150, stop=None, estimate_error=True):
    """Classical fourth-order Runge-Kutta on a uniform mesh.

    The step is shrunk slightly so the mesh lands exactly on ``span[1]``.
    With ``estimate_error`` a companion run at half the step supplies a
    Richardson estimate, ``(16/15) * max |y_h - y_{h/2}|``, of the error
    of the returned samples.  ``stop(r, y)`` truncates the run before the
    first node where it returns true.
    """
    r0, r1 = map(float, span)
    if not h > 0:
        raise DomainError("step must be positive")
    if r1 <= r0:
        raise DomainError("span must be increasing")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    steps = max(1, int(math.ceil((r1 - r0) / h - 1e-9)))

    def f(r, y):
        return np.asarray(rhs(r, y), dtype=float)

    rs, ys, stopped = _rk4(f, y0, r0, r1, steps, guard, stop)
    err = math.nan
    if estimate_error:
        end = rs[-1]
        n_half = 2 * (rs.size - 1)
        if n_half > 0:
            rs2, ys2, _ = _rk4(f, y0, r0, end, n_half, guard, None)
            err = 16.0 / 15.0 * float(np.max(np.abs(ys2[::2] - ys)))
        else:
            err = 0.0
    return Trajectory(rs, ys, err, stopped)


# Quintic Hermite basis on [0, 1], coefficients of t^0..t^5.
_HERMITE5 = np.array([
    [1, 0, 0, -10, 15, -6],        # y0
    [0, 1, 0, -6, 8, -3],          # h * y0'
    [0, 0, 0.5, -1.5, 1.5, -0.5],  # h^2 * y0''
    [0, 0, 0, 10, -15, 6],         # y1
    [0, 0, 0, -4, 7, -3],          # h * y1'
    [0, 0, 0, 0.5, -1, 0.5],       # h^2 * y1''
])


class QuinticHermite:
    """Piecewise quintic interpolant matching value, slope and curvature at nodes."""

    def __init__(self, x, y, dy, ddy):
        self.x = np.asarray(x, dtype=float)
        h = np.diff(self.x)
        data = np.stack([y[:-1], h * dy[:-1], h * h * ddy[:-1],
                         y[1:], h * dy[1:], h * h * ddy[1:]], axis=1)
        self.h = h
        self.coef = data @ _HERMITE5  # (intervals, 6) in powers of t

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        i = np.clip(np.searchsorted(self.x, s, side="right") - 1, 0, self.h.size - 1)
        return s, i, (s - self.x[i]) / self.h[i]

    def __call__(self, s):
        s, i, t = self._locate(s)
        c = self.coef[i]
        return ((((c[..., 5] * t + c[..., 4]) * t + c[..., 3]) * t + c[..., 2]) * t
                + c[..., 1]) * t + c[..., 0]

    def derivative(self, s):
        s, i, t = self._locate(s)
        c = self.coef[i]
        dt = (((5 * c[..., 5] * t + 4 * c[..., 4]) * t + 3 * c[..., 3]) * t
              + 2 * c[..., 2]) * t + c[..., 1]
        return dt / self.h[i]


def _as_array_fn(fn):
    def wrapped(r):
        r = np.asarray(r, dtype=float)
        out = np.asarray(fn(r), dtype=float)
        if out.shape != r.shape:
            out = np.broadcast_to(out, r.shape).copy()
        return out
    return wrapped


@dataclass(frozen=True)
class RadialProfile:
    """A smooth function of the radius with its first two derivatives."""

    value: Callable
    deriv1: Callable
    deriv2: Callable
    r_max: float = math.inf
    label: str = field(default="", compare=False)

    def __call__(self, r):
        return self.value(r)

    @classmethod
    def closed_form(cls, value, deriv1, deriv2, r_max=math.inf, label=""):
        return cls(_as_array_fn(value), _as_array_fn(deriv1), _as_array_fn(deriv2),
                   float(r_max), label)

    @classmethod
    def constant(cls, c, r_max=math.inf):
        c = float(c)
        return cls.closed_form(lambda r: np.full_like(r, c), np.zeros_like,
                               np.zeros_like, r_max, f"const({c!r})")

    @classmethod
    def polynomial(cls, coeffs, r_max=math.inf):
        """``sum(coeffs[k] * r**k)``."""
        poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        d1, d2 = poly.deriv(1), poly.deriv(2)
        return cls.closed_form(poly, d1, d2, r_max, f"poly({list(map(float, coeffs))})")

    @classmethod
    def table(cls, r, values, r_max=None):
        """Cubic spline through tabulated samples, clamped to zero slope at r=0
        when the table starts at the pole."""
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.size < 4 or r.shape != values.shape:
            raise DomainError("table needs matching 1-d arrays of at least 4 samples")
        if np.any(np.diff(r) <= 0):
            raise DomainError("table radii must be strictly increasing")
        bc = ((1, 0.0), "not-a-knot") if r[0] == 0.0 else "not-a-knot"
        spline = CubicSpline(r, values, bc_type=bc)
        top = float(r[-1] if r_max is None else r_max)
        return cls.closed_form(spline, spline.derivative(1), spline.derivative(2),
                               top, "table")

    @classmethod
    def hermite(cls, r, y, dy, ddy_fn, r_max=None, label="sampled"):
        """Hermite interpolants of ODE samples.

        ``ddy_fn(r, y, dy)`` returns the second derivative.  The value is a
        quintic Hermite interpolant of (y, y', y''); the slope has its own
        cubic Hermite interpolant of (y', y''), which avoids differentiating
        the quintic (that amplifies rounding in y by 1/h on fine meshes);
        ``deriv2`` is recomputed from the ODE at arbitrary radii.
        """
        r = np.asarray(r, dtype=float)
        ddy = ddy_fn(r, y, dy)
        interp = QuinticHermite(r, y, dy, ddy)
        slope = CubicHermiteSpline(r, dy, ddy, extrapolate=False)
        top = float(r[-1] if r_max is None else r_max)

        def deriv1(s):
            return slope(np.asarray(s, dtype=float))

        def deriv2(s):
            return ddy_fn(s, interp(s), deriv1(s))

        return cls.closed_form(interp, deriv1, deriv2, top, label)

    def finite_difference_error(self, r, step=1e-4):
        """Max relative mismatch between deriv1/deriv2 and central differences."""
        r = np.asarray(r, dtype=float)
        v_p, v_0, v_m = self.value(r + step), self.value(r), self.value(r - step)
        fd1 = (v_p - v_m) / (2 * step)
        fd2 = (v_p - 2 * v_0 + v_m) / step**2
        d1, d2 = self.deriv1(r), self.deriv2(r)
        e1 = np.abs(fd1 - d1) / np.maximum(1.0, np.abs(d1))
        e2 = np.abs(fd2 - d2) / np.maximum(1.0, np.abs(d2))
        return float(max(e1.max(), e2.max()))


def default_grid(r_max, points=256):
    """Dyadic radii ``r_max * 2**-k`` merged with a uniform grid, ``points`` in all.

    The dyadic part resolves the pole, the uniform part the far field.
    """
    if points < 32:
        raise DomainError("grid needs at least 32 points")
    geom = r_max * 2.0 ** -np.arange(16)
    for count in range(points - 16, 2 * points):
        pts = np.unique(np.concatenate([geom, r_max * np.arange(1, count + 1) / count]))
        if pts.size >= points:
            return pts[-points:]
    return pts
