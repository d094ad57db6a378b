import math

import numpy as np
import pytest
from scipy.integrate import quad

from sturmpoly import Problem
from sturmpoly.cauchy import (_cos_int, _sin_int, cauchy_characteristic, cauchy_from_problem,
                              delta_from_cauchy, held_out_points, invert_from_cauchy,
                              zeros_from_cauchy)
from sturmpoly.core import CauchyData, principal_sqrt
from sturmpoly.errors import FitResidualTooLarge
from sturmpoly.forward import characteristic

from conftest import PI, zero_p0, zero_p1


def _l2(f):
    t = np.linspace(0, PI, 2001)
    return math.sqrt(np.trapezoid(np.abs(f(t)) ** 2, t))


@pytest.mark.parametrize("k", [0, 1, 3, 7])
@pytest.mark.parametrize("rho", [0.0, 0.4, 2.0, 6.3])
def test_trig_integrals_closed_form(k, rho):
    s = quad(lambda t: math.sin(k * t) * math.sin(rho * t), 0, PI)[0]
    c = quad(lambda t: math.cos(k * t) * math.cos(rho * t), 0, PI)[0]
    assert complex(_sin_int(k, rho)) == pytest.approx(s, abs=1e-12)
    assert complex(_cos_int(k, rho)) == pytest.approx(c, abs=1e-12)
    h = 1e-5
    fd = (_sin_int(k, rho + h) - _sin_int(k, rho - h)) / (2 * h)
    assert complex(_sin_int(k, rho, True)) == pytest.approx(complex(fd), abs=1e-8)
    fd = (_cos_int(k, rho + h) - _cos_int(k, rho - h)) / (2 * h)
    assert complex(_cos_int(k, rho, True)) == pytest.approx(complex(fd), abs=1e-8)


def test_delta_from_handmade_cauchy_data():
    cd = CauchyData([0.0, 0.3], [0.1, 0.0, 0.0], [0.5, 0.2], [-0.4], g_poly=[0.05], j_poly=[0.02])
    for rho in (0.7, 2.5):
        lam = rho ** 2
        G = lambda t: 0.3 * math.sin(2 * t) + 0.05
        J = lambda t: 0.1 + 0.02 * (2 * t / PI - 1)
        d1 = rho ** 3 * (-math.sin(rho * PI) + quad(lambda t: G(t) * math.sin(rho * t), 0, PI)[0]) \
            + 0.5 + 0.2 * rho ** 2
        d0 = rho ** 2 * (math.cos(rho * PI) + quad(lambda t: J(t) * math.cos(rho * t), 0, PI)[0]) - 0.4
        got0, got1 = delta_from_cauchy(cd, lam)
        assert got0 == pytest.approx(d0, abs=1e-10) and got1 == pytest.approx(d1, abs=1e-10)


@pytest.mark.parametrize("make", [zero_p0, zero_p1])
def test_zero_models_have_zero_cauchy_data(make):
    cd = cauchy_from_problem(make())
    assert _l2(cd.G) < 1e-8 and _l2(cd.J) < 1e-8
    assert np.max(np.abs(cd.C)) < 1e-8
    assert np.max(np.abs(cd.D), initial=0.0) < 1e-8


@pytest.fixture(scope="module")
def smooth_case():
    pr = Problem.build(lambda x: 0.2 * np.cos(x) + 0.1 * x, (0.5, 1.0), (0.3, -0.2))
    return pr, cauchy_from_problem(pr)


def test_extraction_reproduces_characteristic_functions(smooth_case):
    pr, cd = smooth_case
    assert cd.residuals["held_out"] < 1e-8
    lam = held_out_points(cd.K_F, 20)
    f0, f1, fd0, fd1 = characteristic(pr, lam, derivative=True)
    c0, c1, cd0, cd1 = cauchy_characteristic(cd, lam, derivative=True)
    scale = np.maximum(1.0, np.abs(principal_sqrt(lam)) ** 3)
    assert np.max(np.abs(c0 - f0) / scale) < 1e-8
    assert np.max(np.abs(c1 - f1) / scale) < 1e-8
    assert np.max(np.abs(cd1 - fd1) / scale) < 1e-7
    # near rho = 0 the lam-derivative goes through the Cauchy integral
    _, _, s0, s1 = cauchy_characteristic(cd, np.array([0.01 + 0.0j]), derivative=True)
    _, _, t0, t1 = characteristic(pr, np.array([0.01 + 0.0j]), derivative=True)
    assert abs(s1[0] - t1[0]) < 1e-7 and abs(s0[0] - t0[0]) < 1e-7


def test_zeros_from_cauchy_zero_model():
    cd = cauchy_from_problem(zero_p1())
    z1 = zeros_from_cauchy(cd, 1, 8)
    assert np.max(np.abs(z1[2:] - (np.arange(3, 9) - 2) ** 2)) < 1e-8
    # a fit error eps splits the double zero by ~sqrt(eps)
    assert abs(z1[:2].sum()) < 1e-8 and np.max(np.abs(z1[:2])) < 1e-5
    z0 = zeros_from_cauchy(cd, 0, 8)
    # Delta0 = lam cos(rho pi): a zero at 0 and (n - 1/2)^2
    assert np.max(np.abs(np.sort(z0.real) - np.r_[0.0, (np.arange(1, 8) - 0.5) ** 2])) < 1e-8


def test_under_resolved_fit_suggests_larger_K_F():
    rough = Problem.build(lambda x: np.where(x < 1.5, 0.5, -0.5) * 1.0)
    with pytest.raises(FitResidualTooLarge, match="K_F"):
        cauchy_from_problem(rough, K_F=4)


def test_self_inversion_small(smooth_case):
    pr = zero_p0()
    cd = cauchy_from_problem(pr)
    res = invert_from_cauchy(pr, cd, n_max=12)
    assert np.max(np.abs(res.problem.sigma.values)) < 1e-8
    assert res.diagnostics["cauchy_verify_error"] < 1e-8
