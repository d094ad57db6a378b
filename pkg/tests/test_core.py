import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sturmpoly import core
from sturmpoly.core import (BoundaryPolynomials, CauchyData, PotentialSigma, Problem, SpectralData,
                            contour_integral, contour_radius, eval_poly, make_contour, principal_sqrt)
from sturmpoly.errors import InputError, InvalidProblem

finite = st.floats(-50, 50, allow_nan=False)


@given(finite, finite)
def test_principal_sqrt_squares_back_with_nonnegative_real_part(a, b):
    lam = complex(a, b)
    r = principal_sqrt(lam)
    assert abs(r * r - lam) <= 1e-12 * (1 + abs(lam))
    assert r.real >= 0


def test_principal_sqrt_on_negative_axis_is_upper_half():
    assert principal_sqrt(-4.0) == pytest.approx(2j)


def test_sigma_grid_validation():
    x = np.linspace(0, math.pi, 9)
    with pytest.raises(InvalidProblem):
        PotentialSigma(x[1:], np.zeros(8))
    with pytest.raises(InvalidProblem):
        PotentialSigma(x, np.full(9, np.nan))


def test_sigma_resample_reproduces_smooth_function():
    s = PotentialSigma.from_function(np.sin, 257)
    r = s.resample(1025)
    assert np.max(np.abs(r.values - np.sin(r.grid_points))) < 1e-9


def test_boundary_polynomials_validation():
    with pytest.raises(InvalidProblem):
        BoundaryPolynomials((0.0, 2.0), (0.0,))
    with pytest.raises(InvalidProblem):
        BoundaryPolynomials((1.0,), (0.0, 1.0))
    bp = BoundaryPolynomials((2.0, 3.0, 1.0), (1.0, -1.0))
    assert bp.p == 2
    lam = np.array([0.5, 2 + 1j])
    assert np.allclose(eval_poly(bp, "r1", lam), 2 + 3 * lam + lam ** 2)
    assert np.allclose(eval_poly(bp, "r2", lam), 1 - lam)


def test_common_root_is_reported():
    assert not BoundaryPolynomials((0.0, 1.0), (0.0,)).is_coprime
    assert BoundaryPolynomials((1.0, 1.0), (1.0,)).is_coprime


def test_spectral_data_orders_and_validates():
    sd = SpectralData.from_clusters([4.0, 0.0, 1.0], [1, 2, 1], [[0.6], [0.3, 0.1], [0.6]], 1, 3)
    assert np.allclose(sd.eigenvalues.real, [0, 0, 1, 4])
    assert sd.clusters == ((0, 2), (2, 1), (3, 1))
    assert list(sd.multiplicities) == [2, 2, 1, 1]
    with pytest.raises(InputError):
        SpectralData(np.zeros(2), np.ones(2), ((0, 1),), 0, 1)
    with pytest.raises(InputError):
        sd.with_tail_from(sd, 2)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=6), st.integers(0, 3))
def test_spectral_data_serialization_round_trip(pairs, p):
    vals = [complex(i * 10 + a * 1e-3, b) for i, (a, b) in enumerate(pairs)]
    sd = SpectralData.from_clusters(vals, [1] * len(vals), [[complex(b, a)] for a, b in pairs], p, 1)
    back = core.loads(core.dumps(sd), SpectralData)
    assert np.array_equal(back.eigenvalues, sd.eigenvalues)
    assert np.array_equal(back.weights, sd.weights)
    assert back.clusters == sd.clusters and back.p == sd.p


def test_problem_serialization_round_trip(tmp_path):
    pr = Problem.build(lambda x: np.cos(x) + 0.5j * x, (1.0, 2.0, 1.0), (0.5, 0.0, 3.0), n_x=33)
    core.save(pr, tmp_path / "p.json")
    back = core.load(tmp_path / "p.json", Problem)
    assert np.array_equal(back.sigma.values, pr.sigma.values)
    assert np.array_equal(back.polys.d, pr.polys.d)


def test_loads_rejects_wrong_type_and_garbage():
    with pytest.raises(InputError):
        core.loads("{not json")
    with pytest.raises(InputError):
        core.loads('{"type": "Nope"}')
    with pytest.raises(InputError):
        core.loads(core.dumps(Problem.build()), SpectralData)


def test_contour_radius_and_integral():
    assert contour_radius(5, 1) == pytest.approx(2.5 ** 2)
    g = make_contour(5, 1, 128)
    assert np.allclose(np.abs(g.nodes), 6.25)
    assert contour_integral(1 / (g.nodes - 1.5), g) == pytest.approx(1.0, abs=1e-13)
    assert abs(contour_integral(1 / (g.nodes - 9.0), g)) < 1e-10


def test_cauchy_data_evaluates_series():
    cd = CauchyData([1.0, 0.5], [0.25, 0.0, -1.0], [0.0, 1.0], [2.0], g_poly=[0.1], j_poly=[0.2])
    t = np.linspace(0, math.pi, 7)
    assert np.allclose(cd.G(t), np.sin(t) + 0.5 * np.sin(2 * t) + 0.1)
    assert np.allclose(cd.J(t), 0.25 - np.cos(2 * t) + 0.2 * (2 * t / math.pi - 1))
    back = core.loads(core.dumps(cd), CauchyData)
    assert np.array_equal(back.j_poly, cd.j_poly) and back.p == 1
    with pytest.raises(InputError):
        CauchyData([1.0], [1.0], [1.0], [])
