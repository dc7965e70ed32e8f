import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial as P
from scipy.linalg import eigh_tridiagonal

from solvol import models, spectral
from solvol.errors import DomainError, PreconditionError

from conftest import FLAT_QE_KEYS


def flat(r_max=10.0):
    return models.flat_trivial(3, r_max)


def test_flat_dirichlet_oracle():
    est = spectral.lambda1_estimate(flat(), 10.0, 4096)
    assert est.lambda1 == pytest.approx((math.pi / 10) ** 2, abs=1e-8)
    assert est.method == "sturm_liouville"
    assert est.discretization_error <= 1e-6


def test_bisection_matches_dense_solver():
    diag, off = spectral.radial_operator(models.hyperbolic_qe(3, 2), 6.0, 512)
    ref = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))[0]
    assert spectral.smallest_eigenvalue(diag, off) == pytest.approx(ref, rel=1e-11)


def test_sturm_count_brackets():
    diag, off = spectral.radial_operator(flat(), 10.0, 128)
    lam = spectral.smallest_eigenvalue(diag, off)
    assert spectral.sturm_count(diag, off, lam * (1 - 1e-9)) == 0
    assert spectral.sturm_count(diag, off, lam * (1 + 1e-9)) == 1


def test_hyperbolic_limit():
    model = models.hyperbolic_space(3, r_max=40)
    out = spectral.extrapolate_in_L(model, [10, 20, 40], mesh=4096)
    assert out["values"][-1] == pytest.approx(1.0, abs=2e-2)
    assert out["limit"] == pytest.approx(1.0, abs=1e-3)
    assert out["values"] == sorted(out["values"], reverse=True)


@pytest.mark.parametrize("model", [flat(), models.hyperbolic_qe(3, 2), models.gaussian_soliton(4)],
                         ids=["flat", "hyp", "gauss"])
def test_domain_monotonicity(model):
    # fixed mesh density: h = 5/256
    small = spectral.lambda1_estimate(model, 5.0, 256).lambda1
    large = spectral.lambda1_estimate(model, 10.0, 512).lambda1
    assert large <= small + 1e-8


RATIO_ABOVE_FOUR = pytest.mark.xfail(
    strict=True,
    reason="successive-difference ratio tends to 4 from above (4.0005 at mesh 256); "
           "the factor 4 is the asymptotic ratio itself, so the bound has no slack here")


@pytest.mark.parametrize("model", [
    flat(), models.gaussian_soliton(3),
    pytest.param(models.hyperbolic_space(3), marks=RATIO_ABOVE_FOUR),
    pytest.param(models.hyperbolic_qe(3, 2), marks=RATIO_ABOVE_FOUR),
], ids=["flat", "gauss", "hyp_f0", "hyp_qe"])
def test_mesh_convergence(model):
    vals = [spectral.lambda1_estimate(model, 8.0, m).lambda1 for m in (256, 512, 1024)]
    assert abs(vals[0] - vals[1]) <= 4 * abs(vals[1] - vals[2]) + 1e-10


@pytest.mark.parametrize("model", [flat(), models.gaussian_soliton(3), models.hyperbolic_qe(3, 2)],
                         ids=["flat", "gauss", "hyp_qe"])
def test_observed_second_order(model):
    vals = [spectral.lambda1_estimate(model, 8.0, m).lambda1 for m in (256, 512, 1024)]
    assert (vals[0] - vals[1]) / (vals[1] - vals[2]) == pytest.approx(4.0, abs=0.1)
    est = spectral.lambda1_estimate(model, 8.0, 512)
    assert abs(vals[2] - est.lambda1) <= 4 * est.discretization_error + 1e-12


def test_mesh_guard():
    with pytest.raises(PreconditionError):
        spectral.lambda1_estimate(flat(), 10.0, 32)
    with pytest.raises(DomainError):
        spectral.lambda1_estimate(flat(), 11.0, 128)
    with pytest.raises(PreconditionError):
        spectral.lambda1_estimate(models.ricci_flat_product_qe(2, 1), 1.0, 128)


def test_rayleigh_flat_closed_form():
    s = P([0, 1])
    inner = (s**2).integ()
    ring = ((10 - s) ** 2 * s**2).integ()
    mass = inner(9) - inner(0) + ring(10) - ring(9)
    energy = inner(10) - inner(9)
    assert spectral.rayleigh_quotient(flat(12.0), 0.0, 10.0) == pytest.approx(energy / mass, rel=1e-10)


@pytest.mark.parametrize("alpha, rcut", [(0.0, 5.0), (-0.5, 8.0), (-1.0, 4.0)])
def test_rayleigh_above_lambda1(alpha, rcut):
    model = flat()
    q = spectral.rayleigh_quotient(model, alpha, rcut)
    assert q >= spectral.lambda1_estimate(model, rcut, 2048).lambda1 - 1e-6


def test_rayleigh_guards():
    with pytest.raises(DomainError):
        spectral.rayleigh_quotient(flat(), 0.0, 9.5)
    with pytest.raises(DomainError):
        spectral.rayleigh_quotient(flat(), 0.0, 0.5)


def test_rayleigh_sequence_approaches_limit():
    model = flat(41.0)
    c, delta = 2.0, 0.1
    alpha = -(c + delta) / 2
    qs = [spectral.rayleigh_quotient(model, alpha, rc) for rc in (10.0, 20.0, 40.0)]
    eps = 0.1
    assert qs[-1] <= (1 + eps) * (c + delta) ** 2 / 4


def test_rayleigh_split_estimate():
    rows = spectral.rayleigh_diagnostics(flat(), 2.0)
    assert len(rows) == 27
    assert all(row["split_ok"] for row in rows)


def test_eigenvalue_check_flat():
    out = spectral.cor1_4_check(flat())
    assert out["pass"] and out["c"] == pytest.approx(2.0)
    assert out["threshold"] == pytest.approx(1.0)
    assert out["lambda1"] == pytest.approx((math.pi / 10) ** 2, abs=1e-7)


@pytest.mark.parametrize("key", FLAT_QE_KEYS)
def test_eigenvalue_check_generated(gen, key):
    out = spectral.cor1_4_check(gen(key))
    assert out["pass"], out


def test_eigenvalue_check_threshold_arithmetic():
    assert 3.0**2 / 4 == 2.25


def test_eigenvalue_check_guard():
    with pytest.raises(PreconditionError):
        spectral.cor1_4_check(models.hyperbolic_qe(3, 2))
    with pytest.raises(PreconditionError):
        spectral.stochastic_completeness_certificate(models.hyperbolic_qe(3, 2))


def test_certificate_flat():
    cert = spectral.stochastic_completeness_certificate(flat())
    assert cert["issued"] and cert["c"] == pytest.approx(2.0)
    assert "Grigor'yan" in cert["reference"]


@pytest.mark.parametrize("key", FLAT_QE_KEYS)
def test_certificate_gated_on_growth_check(gen, key):
    from solvol.bounds import thm1_5_check
    model = gen(key)
    assert spectral.stochastic_completeness_certificate(model)["issued"] == thm1_5_check(model).passed


def test_estimate_serializes():
    d = spectral.lambda1_estimate(flat(), 10.0, 128).as_dict()
    assert set(d) >= {"L", "mesh", "lambda1", "method"}
