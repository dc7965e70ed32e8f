import math

import numpy as np
import pytest

from solvol import bounds, models
from solvol.errors import DomainError, HypothesisError, PreconditionError
from solvol.models import MetricMeasure, PoleModel, QuasiEinstein
from solvol.numerics import RadialProfile, default_grid

from conftest import FLAT_QE_KEYS, METRIC_MEASURE_KEYS

RADII = np.array([0.5, 1.0, 2.0, 5.0, 10.0])


def test_sphere_constants():
    assert bounds.sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert bounds.sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert bounds.unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)


def test_euclidean_ball():
    assert bounds.ball_volume(models.gaussian_soliton(3), 1.0)[0] == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_hyperbolic_ball_closed_form():
    model = models.hyperbolic_qe(3, 2, r_max=20)
    r = np.array([1.0, 3.0, 10.0, 20.0])
    np.testing.assert_allclose(bounds.ball_volume(model, r), math.pi * (np.sinh(2 * r) - 2 * r), rtol=1e-10)
    assert bounds.ball_volume(model, 1.0)[0] == pytest.approx(5.1109327057, abs=1e-9)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_small_ball_asymptotics(n):
    vol = bounds.ball_volume(models.hyperbolic_qe(n, 2), 1e-3)[0]
    assert vol / (bounds.unit_ball_volume(n) * 1e-3**n) == pytest.approx(1.0, abs=1e-5)


def test_weighted_equals_unweighted_for_zero_potential():
    model = models.flat_trivial(3)
    r = default_grid(10.0)
    assert bounds.weighted_ball_volume(model, r).tobytes() == bounds.ball_volume(model, r).tobytes()


def test_gaussian_weighted_total_mass_n2():
    # |S^1| ∫_0^∞ e^{-s^2/4} s ds = 2π · 2
    model = models.gaussian_soliton(2, r_max=40)
    assert bounds.weighted_ball_volume(model, 40.0)[0] == pytest.approx(4 * math.pi, rel=1e-10)


def test_hyperbolic_qe_weighted_closed_form():
    # e^{-f} = cosh^2, so 4π ∫ cosh^2 sinh^2 = π (sinh 4r / 8 - r / 2)
    model = models.hyperbolic_qe(3, 2)
    r = np.array([1.0, 2.5])
    expected = math.pi * (np.sinh(4 * r) / 8 - r / 2)
    np.testing.assert_allclose(bounds.weighted_ball_volume(model, r), expected, rtol=1e-10)


def test_volume_strictly_increasing():
    vol = bounds.ball_volume(models.hyperbolic_qe(4, 3), default_grid(10.0))
    assert np.all(np.diff(vol) > 0)


@pytest.mark.parametrize("n", [2, 3, 4, 8])
def test_gaussian_sharpness(n):
    g = models.gaussian_soliton(n)
    exact = bounds.unit_ball_volume(n) * RADII**n
    for value in (bounds.thm1_1_bound(g, RADII), *bounds.cor1_2_bounds(g, RADII),
                  bounds.thm1_7_bound(models.gaussian_soliton(n, kind=MetricMeasure()), RADII)[0]):
        assert np.max(np.abs(value - exact) / exact) <= 1e-8


def test_gaussian_shrinker_bound_example():
    assert bounds.thm1_1_bound(models.gaussian_soliton(3), 2.0)[0] == pytest.approx(32 * math.pi / 3, rel=1e-12)


def test_c0_bound_dominates_gaussian():
    g = models.gaussian_soliton(3)
    c0 = bounds.unit_ball_volume(3) * math.exp(1.5) * RADII**3
    assert np.all(c0 >= bounds.ball_volume(g, RADII))


def test_infimum_bounds_ratio_is_exp_inf():
    model = models.gaussian_soliton(3, kind=MetricMeasure())
    first, second = bounds.cor1_2_bounds(model, RADII)
    np.testing.assert_allclose(second / first, 1.0)


def test_grid_infimum_finds_interior_minimum():
    assert bounds.grid_infimum(lambda r: (r - 3.3) ** 2 + 1, 10.0) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("kind", ["thm1_1", "cor1_2_infR", "cor1_2_plain"])
def test_shrinker_bounds_refuse_qe(kind):
    with pytest.raises(PreconditionError):
        bounds.bound_report(models.hyperbolic_qe(3, 2), kind)


def test_metric_measure_bound_refuses_hypothesis_failure():
    # potential too flat: Ric_f = f'' = 0.2 < 1/2 on flat space
    model = PoleModel(3, RadialProfile.polynomial([0, 1]), RadialProfile.polynomial([0, 0, 0.1]),
                      MetricMeasure(), 5.0)
    with pytest.raises(HypothesisError) as info:
        bounds.thm1_7_bound(model, 1.0)
    assert info.value.report is not None and not info.value.report.passed


@pytest.mark.parametrize("key", METRIC_MEASURE_KEYS)
def test_metric_measure_bound_dominance(gen, key):
    rep = bounds.bound_report(gen(key), "thm1_7")
    assert rep.passed
    assert rep.min_margin > 0
    assert rep.diagnostics["coarse_min_margin"] >= 0


def test_flat_qe_bound_trivial_equality():
    model = models.flat_trivial(3, f0=0.4)
    g = default_grid(10.0)
    bound = bounds.thm1_3_bound(model, g)
    actual = bounds.ball_volume(model, g)
    assert np.max(np.abs(bound - actual) / actual) <= 1e-8


@pytest.mark.parametrize("key", FLAT_QE_KEYS)
def test_flat_qe_bound_dominance(gen, key):
    rep = bounds.bound_report(gen(key), "thm1_3")
    assert rep.passed and rep.constants["variant"] == "statement"


def test_flat_qe_minus_variant_fails_with_offset(gen):
    rep = bounds.bound_report(gen("qe_rat_n3"), "thm1_3", variant="proof")
    assert not rep.passed
    assert rep.diagnostics["other_variant_min_margin"] >= -1e-8


def test_weighted_growth_flat_constants():
    consts = bounds.thm1_5_constants(models.flat_trivial(3))
    assert consts.rate == pytest.approx(2.0, rel=1e-14)
    expected_b = 4 * math.pi / 3 + 4 * math.pi * math.exp(-2) / 2
    assert consts.prefactor == pytest.approx(expected_b, rel=1e-10)
    assert not consts.fallback


def test_weighted_growth_flat_report():
    rep = bounds.thm1_5_check(models.flat_trivial(3))
    assert rep.passed and rep.grid[0] == 1.0


def test_weighted_growth_fallback_on_decaying_density():
    # f grows fast enough that m_f'/m_f < 0 at r0 = 1
    f = models.log_potential(3.0)
    model = PoleModel(3, RadialProfile.polynomial([0, 1]), f, QuasiEinstein(2.0, 0.0), 10.0)
    consts = bounds.thm1_5_constants(model)
    assert consts.fallback and consts.rate == bounds.FALLBACK_RATE
    assert consts.C < 0


def test_weighted_growth_guards():
    with pytest.raises(PreconditionError):
        bounds.thm1_5_constants(models.hyperbolic_qe(3, 2))
    with pytest.raises(DomainError):
        bounds.thm1_5_constants(models.flat_trivial(3), r0=11.0)


@pytest.mark.parametrize("key", ["flat", *FLAT_QE_KEYS])
def test_weighted_growth_generated(gen, key):
    rep = bounds.thm1_5_check(gen(key))
    assert rep.passed, rep.summary()


def test_negative_lambda_constants():
    model = models.hyperbolic_qe(3, 2, r_max=20)
    consts = bounds.thm1_6_constants(model)
    C = 1 / math.tanh(1) + math.tanh(1) - 4
    b = math.sqrt(C + 2 + 4)
    a = math.pi * (math.sinh(2) - 2) + 4 * math.pi * math.sinh(1) ** 2 * math.exp(-b) / b
    assert consts.C == pytest.approx(C, rel=1e-12)
    assert consts.rate == pytest.approx(b, rel=1e-12)
    assert consts.prefactor == pytest.approx(a, rel=1e-10)
    assert consts.extra["gradient_bound_sq"] == 16
    assert consts.rate > 0 and consts.prefactor > 0


def test_negative_lambda_report():
    rep = bounds.thm1_6_check(models.hyperbolic_qe(3, 2, r_max=20))
    assert rep.passed
    assert rep.diagnostics["max_grad_sq"] == pytest.approx(4 * math.tanh(20) ** 2)
    assert rep.grid[0] == 1.0 and rep.grid[-1] == 20.0


def test_negative_lambda_guards():
    with pytest.raises(PreconditionError):
        bounds.thm1_6_constants(models.flat_trivial(3))
    with pytest.raises(PreconditionError):
        bounds.thm1_6_constants(models.hyperbolic_qe(3, 2, r_max=0.5))


def test_unknown_kind():
    with pytest.raises(PreconditionError):
        bounds.bound_report(models.gaussian_soliton(3), "thm9")


def test_report_margin_convention():
    rep = bounds.bound_report(models.gaussian_soliton(3), "cor1_2_plain")
    np.testing.assert_array_equal(rep.margin, rep.bound - rep.actual)
    assert rep.min_margin == float(np.min(rep.margin))
    assert rep.summary()["pass"] is True


def test_averaged_bound_below_plain_when_scalar_curvature_nonnegative():
    g = models.gaussian_soliton(4)
    r = default_grid(10.0)
    assert np.all(bounds.thm1_1_bound(g, r) <= bounds.cor1_2_bounds(g, r)[1] * (1 + 1e-12))
