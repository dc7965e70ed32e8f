import math

import numpy as np
import pytest

from solvol import numerics
from solvol.errors import ConvergenceError, DivergenceError, DomainError
from solvol.numerics import RadialProfile


def test_polynomial_integral_is_exact():
    assert numerics.integrate(lambda s: s * s, 0.0, 1.0) == pytest.approx(1 / 3, abs=1e-15)


def test_sinh_squared_against_antiderivative():
    expected = (math.sinh(2.0) - 2.0) / 4.0
    assert numerics.integrate(lambda s: np.sinh(s) ** 2, 0.0, 1.0) == pytest.approx(expected, rel=1e-12)


def test_zero_integrand():
    assert numerics.integrate(lambda s: np.zeros_like(s), 0.0, 1.0) == 0.0


def test_reported_error_within_tolerance():
    value, err = numerics.integrate_with_error(lambda s: np.exp(-s * s), 0.0, 1.0, tol=1e-10)
    exact = math.sqrt(math.pi) / 2 * math.erf(1.0)
    assert err <= 1e-10 * (1 + abs(value))
    assert abs(value - exact) <= 1e-10 * (1 + abs(exact))


def test_additivity():
    tol = 1e-10
    p = lambda s: np.cos(3 * s) * np.exp(s)
    ab = numerics.integrate(p, 0.0, 0.7, tol)
    bc = numerics.integrate(p, 0.7, 2.0, tol)
    ac = numerics.integrate(p, 0.0, 2.0, tol)
    assert abs(ab + bc - ac) <= 2 * tol * (1 + abs(ac))


def test_simpson_order():
    exact = math.sqrt(math.pi) / 2 * math.erf(1.0)
    p = lambda s: np.exp(-s * s)
    e1 = abs(numerics.composite_simpson(p, 0.0, 1.0, 8) - exact)
    e2 = abs(numerics.composite_simpson(p, 0.0, 1.0, 16) - exact)
    assert e1 / e2 >= 12


def test_non_finite_integrand_is_domain_error():
    with pytest.raises(DomainError), np.errstate(divide="ignore"):
        numerics.integrate(lambda s: 1.0 / (s - 0.5), 0.0, 1.0)


def test_panel_cap_raises_convergence_error():
    with pytest.raises(ConvergenceError):
        numerics.integrate(lambda s: np.sin(1.0 / (s + 1e-4)), 0.0, 1.0, tol=1e-14)


def test_reversed_limits_rejected():
    with pytest.raises(DomainError):
        numerics.integrate(lambda s: s, 1.0, 0.0)


def test_cumulative_matches_individual():
    grid = np.array([0.5, 1.0, 2.0, 3.0])
    cum = numerics.cumulative_integral(np.cos, grid)
    np.testing.assert_allclose(cum, np.sin(grid), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("p, t, expected", [
    (lambda s: np.full_like(s, 7.0), 3.0, 7.0),
    (lambda s: s, 2.0, 1.0),
    (lambda s: s * s, 0.0, 0.0),
])
def test_average_integral(p, t, expected):
    assert numerics.average_integral(p, t) == pytest.approx(expected, abs=1e-14)


def test_average_integrals_vectorized():
    out = numerics.average_integrals(lambda s: s, np.array([0.0, 2.0, 4.0]))
    np.testing.assert_allclose(out, [0.0, 1.0, 2.0], atol=1e-14)


def test_antiderivative_smooth_average():
    F = numerics.Antiderivative(np.cos, 10.0)
    t = np.array([0.0, 1e-6, 0.5, 3.0, 10.0])
    expected = np.where(t > 0, np.sin(t) / np.where(t > 0, t, 1), 1.0)
    np.testing.assert_allclose(F.average(t), expected, atol=1e-12)
    with pytest.raises(DomainError):
        F(11.0)


def test_rk4_exponential():
    traj = numerics.solve_ivp(lambda r, y: y, [1.0], (0.0, 1.0), 1e-3)
    assert abs(traj.y[-1, 0] - math.e) <= 1e-9
    assert traj.r[-1] == 1.0


def test_rk4_free_particle_exact():
    traj = numerics.solve_ivp(lambda r, y: np.array([y[1], 0.0]), [0.0, 1.0], (0.0, 5.0), 0.01)
    np.testing.assert_allclose(traj.y[:, 0], traj.r, atol=1e-13)


def test_rk4_richardson_consistency():
    rhs = lambda r, y: np.array([y[1], -y[0]])
    coarse = numerics.solve_ivp(rhs, [0.0, 1.0], (0.0, 3.0), 0.05)
    half = numerics.solve_ivp(rhs, [0.0, 1.0], (0.0, 3.0), 0.025, estimate_error=False)
    gap = np.max(np.abs(half.y[::2] - coarse.y))
    assert gap <= 16 * coarse.error
    assert np.max(np.abs(coarse.y[:, 0] - np.sin(coarse.r))) <= 16 * coarse.error


def test_rk4_deterministic():
    rhs = lambda r, y: np.array([y[1], -np.sin(y[0])])
    a = numerics.solve_ivp(rhs, [0.3, 0.0], (0.0, 4.0), 0.01)
    b = numerics.solve_ivp(rhs, [0.3, 0.0], (0.0, 4.0), 0.01)
    assert a.y.tobytes() == b.y.tobytes()


def test_rk4_blow_up():
    with pytest.raises(DivergenceError):
        numerics.solve_ivp(lambda r, y: y * y, [1.0], (0.0, 2.0), 1e-3)


def test_rk4_stop_truncates():
    traj = numerics.solve_ivp(lambda r, y: np.array([y[1], -y[0]]), [0.0, 1.0], (0.0, 5.0), 0.01,
                              stop=lambda r, y: y[0] <= 0)
    assert traj.stopped
    assert traj.r[-1] < math.pi and traj.y[-1, 0] > 0


def test_closed_form_finite_differences():
    prof = RadialProfile.closed_form(np.sinh, np.cosh, np.sinh, r_max=10.0)
    assert prof.finite_difference_error(np.linspace(0.1, 10.0, 50)) <= 1e-6


def test_table_profile_clamped_at_pole():
    r = np.linspace(0.0, 5.0, 200)
    prof = RadialProfile.table(r, r**2 / 4)
    assert abs(prof.deriv1(np.array([0.0]))[0]) == 0.0
    np.testing.assert_allclose(prof.value(np.array([1.3, 4.2])), [1.3**2 / 4, 4.2**2 / 4], rtol=1e-6)


def test_table_rejects_bad_input():
    with pytest.raises(DomainError):
        RadialProfile.table([0.0, 1.0, 0.5, 2.0], [0, 1, 2, 3])


def test_default_grid():
    grid = numerics.default_grid(10.0)
    assert grid.size == 256
    assert grid[0] > 0 and grid[-1] == 10.0
    assert np.all(np.diff(grid) > 0)


@pytest.mark.parametrize("t", [5e-324, 1e-200, 1e-9])
def test_average_integral_tiny_radius(t):
    # mean of 3 + sin over [0, t] is 3 + (1 - cos t)/t = 3 + 2 sin^2(t/2)/t
    expected = 3.0 + 2.0 * math.sin(t / 2) ** 2 / t
    assert numerics.average_integral(lambda s: 3.0 + np.sin(s), t) == pytest.approx(expected, abs=1e-14)


def test_antiderivative_average_tiny_radius():
    F = numerics.Antiderivative(lambda s: 3.0 + np.sin(s), 5.0)
    np.testing.assert_allclose(F.average(np.array([5e-324, 1e-200, 1e-3])), [3.0, 3.0, 3.0005], atol=1e-7)
    with pytest.raises(DomainError):
        F.average(-1.0)


def test_relative_mode_resolves_small_integrals():
    vals, errs = numerics.integrate_many(lambda s: s**7, 0.0, np.array([0.25, 2.0]), 1e-11, relative=True)
    exact = np.array([0.25, 2.0]) ** 8 / 8
    assert np.all(np.abs(vals - exact) <= 1e-10 * exact)
