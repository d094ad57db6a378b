"""Generalized Cauchy data: extraction, evaluation of Delta0/Delta1, inversion.

The representations used are::

    Delta0 = rho**(2p) cos(rho pi) + rho**(2p) int_0^pi J(t) cos(rho t) dt + sum_{n<p} D_n rho**(2n)
    Delta1 = -rho**(2p+1) sin(rho pi) + rho**(2p+1) int_0^pi G(t) sin(rho t) dt + sum_{n<=p} C_n rho**(2n)

with ``rho = sqrt(lam)``.  Trigonometric basis integrals are evaluated in
closed form, polynomial ones by Gauss-Legendre quadrature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre
from scipy.linalg import lstsq

from .config import Config
from .core import (CauchyData, Problem, ReconstructionResult, SpectralData, WeylDiffSamples,
                   legendre_on_interval, make_contour, principal_sqrt)
from .errors import FitResidualTooLarge, VerificationFailure
from .forward import characteristic
from . import inverse, spectrum

logger = logging.getLogger(__name__)

N_POLY = 6
FIT_TOL = 1e-6
SMALL_RHO = 0.3
RIDGE = 1e-10


# ---------------------------------------------------------------------------
# Basis integrals
# ---------------------------------------------------------------------------

def _dsinc(x):
    """Derivative of ``numpy.sinc``."""
    x = np.asarray(x, dtype=np.complex128)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    big = (np.cos(math.pi * xs) - np.sinc(xs)) / xs
    series = -math.pi ** 2 * x / 3 + math.pi ** 4 * x ** 3 / 30
    return np.where(small, series, big)


def _sin_int(k, rho, derivative=False):
    """``int_0^pi sin(k t) sin(rho t) dt`` (or its rho-derivative)."""
    a, b = k - rho, k + rho
    if derivative:
        return 0.5 * math.pi * (-_dsinc(a) - _dsinc(b))
    return 0.5 * math.pi * (np.sinc(a) - np.sinc(b))


def _cos_int(k, rho, derivative=False):
    """``int_0^pi cos(k t) cos(rho t) dt`` (or its rho-derivative)."""
    a, b = k - rho, k + rho
    if derivative:
        return 0.5 * math.pi * (-_dsinc(a) + _dsinc(b))
    return 0.5 * math.pi * (np.sinc(a) + np.sinc(b))


def _gauss(rho) -> tuple:
    n = 128 + 2 * int(math.ceil(float(np.max(np.abs(rho), initial=0.0))))
    x, w = legendre.leggauss(n)
    return (x + 1.0) * math.pi / 2, w * math.pi / 2


def _poly_ints(js, rho, kind: str, derivative=False) -> np.ndarray:
    """Columns ``int_0^pi P_j(t) trig(rho t) dt`` for ``j`` in ``js``; shape (len(rho), len(js))."""
    t, w = _gauss(rho)
    P = np.array([legendre_on_interval(j, t) for j in js]).T if len(js) else np.zeros((t.size, 0))
    rt = np.multiply.outer(rho, t)
    if kind == "sin":
        K = t * np.cos(rt) if derivative else np.sin(rt)
    else:
        K = -t * np.sin(rt) if derivative else np.cos(rt)
    return (K * w) @ P


def _design(rho, p: int, K_F: int, n_poly: int, which: int, derivative: bool = False):
    """Columns multiplying the unknowns of the integral term (without the rho power)."""
    rho = np.asarray(rho, dtype=np.complex128)
    if which == 1:
        k = np.arange(1, K_F + 1)
        trig = _sin_int(k[None, :], rho[:, None], derivative)
        poly = _poly_ints(range(n_poly), rho, "sin", derivative)
    else:
        k = np.arange(0, K_F + 1)
        trig = _cos_int(k[None, :], rho[:, None], derivative)
        poly = _poly_ints(range(1, n_poly + 1), rho, "cos", derivative)
    return np.hstack([trig, poly])


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _delta_rho(cd: CauchyData, rho, derivative=False):
    """``(Delta0, Delta1)`` as functions of rho, optionally with rho-derivatives."""
    p = cd.p
    g = np.concatenate([cd.g_coef, cd.g_poly])
    jc = np.concatenate([cd.j_coef, cd.j_poly])
    SG = _design(rho, p, cd.K_F, cd.g_poly.size, 1) @ g
    CJ = _design(rho, p, cd.K_F, cd.j_poly.size, 0) @ jc
    n1 = np.arange(p + 1)
    n0 = np.arange(p)
    pw1 = rho ** (2 * p + 1)
    pw0 = rho ** (2 * p)
    s, c = np.sin(rho * math.pi), np.cos(rho * math.pi)
    d1 = pw1 * (-s + SG) + (rho[:, None] ** (2 * n1)) @ cd.C
    d0 = pw0 * (c + CJ) + ((rho[:, None] ** (2 * n0)) @ cd.D if p else 0.0)
    if not derivative:
        return d0, d1
    dSG = _design(rho, p, cd.K_F, cd.g_poly.size, 1, True) @ g
    dCJ = _design(rho, p, cd.K_F, cd.j_poly.size, 0, True) @ jc
    dd1 = (2 * p + 1) * rho ** (2 * p) * (-s + SG) + pw1 * (-math.pi * c + dSG)
    dd1 = dd1 + (rho[:, None] ** np.maximum(2 * n1 - 1, 0)) @ (2 * n1 * cd.C)
    dd0 = (2 * p * rho ** (2 * p - 1) if p else 0.0) * (c + CJ) + pw0 * (-math.pi * s + dCJ)
    if p:
        dd0 = dd0 + (rho[:, None] ** np.maximum(2 * n0 - 1, 0)) @ (2 * n0 * cd.D)
    return d0, d1, dd0, dd1


def delta_from_cauchy(cd: CauchyData, lam):
    """``(Delta0(lam), Delta1(lam))`` from the Cauchy data."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    d0, d1 = _delta_rho(cd, principal_sqrt(lam_arr))
    if np.ndim(lam) == 0:
        return complex(d0[0]), complex(d1[0])
    return d0, d1


def cauchy_characteristic(cd: CauchyData, lam, derivative: bool = False):
    """Same calling convention as :func:`sturmpoly.forward.characteristic`.

    lam-derivatives come from ``d/drho / (2 rho)``; near ``lam = 0`` they are
    taken by the Cauchy integral formula instead to avoid the division.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    rho = principal_sqrt(lam)
    if not derivative:
        return _delta_rho(cd, rho)
    d0, d1, dr0, dr1 = _delta_rho(cd, rho, True)
    with np.errstate(divide="ignore", invalid="ignore"):
        dd0, dd1 = dr0 / (2 * rho), dr1 / (2 * rho)
    small = np.abs(rho) < SMALL_RHO
    if np.any(small):
        M, r = 32, 0.05
        e = r * np.exp(2j * math.pi * np.arange(M) / M)
        pts = (lam[small][:, None] + e[None, :]).ravel()
        v0, v1 = _delta_rho(cd, principal_sqrt(pts))
        dd0[small] = (v0.reshape(-1, M) / e).mean(axis=1)
        dd1[small] = (v1.reshape(-1, M) / e).mean(axis=1)
    return d0, d1, dd0, dd1


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def _fit(A: np.ndarray, b: np.ndarray, weights: np.ndarray, ridge: float = RIDGE):
    """Weighted least squares with a small ridge term.

    The trigonometric and polynomial columns are nearly dependent; the ridge
    keeps sampling noise from leaking into that near-null space.
    """
    Aw = np.vstack([A * weights[:, None], ridge * np.eye(A.shape[1])])
    bw = np.concatenate([b * weights, np.zeros(A.shape[1])])
    sol, *_ = lstsq(Aw, bw, lapack_driver="gelsy")
    res = float(np.max(np.abs(A @ sol - b) * weights))
    return sol, res


def cauchy_from_problem(problem: Problem, K_F: int = 64, n_poly: int = N_POLY,
                        fit_tol: float = FIT_TOL, tol: float = 1e-11) -> CauchyData:
    """Fit Cauchy data to ``Delta0``, ``Delta1`` sampled at ``rho_k = k/2``.

    The sample count is ``2 (K_F + n_poly + p + 2)``, twice the number of
    unknowns; rows are weighted by ``1 / max(1, |rho|**(2p+1))`` so the
    reported residual is relative.  Residuals at 50 held-out points spread
    over the sampled band are also recorded.

    Raises
    ------
    FitResidualTooLarge
        Either residual exceeds ``fit_tol``; raising ``K_F`` usually helps.
    """
    p = problem.p
    n_s = 2 * (K_F + n_poly + p + 2)
    rho = np.arange(1, n_s + 1) / 2.0 + 0j
    d0, d1 = characteristic(problem, rho ** 2, tol=tol)
    w = 1.0 / np.maximum(1.0, np.abs(rho) ** (2 * p + 1))

    A1 = np.hstack([rho[:, None] ** (2 * p + 1) * _design(rho, p, K_F, n_poly, 1),
                    rho[:, None] ** (2 * np.arange(p + 1))])
    b1 = d1 + rho ** (2 * p + 1) * np.sin(rho * math.pi)
    x1, res1 = _fit(A1, b1, w)
    A0 = rho[:, None] ** (2 * p) * _design(rho, p, K_F, n_poly, 0)
    if p:
        A0 = np.hstack([A0, rho[:, None] ** (2 * np.arange(p))])
    b0 = d0 - rho ** (2 * p) * np.cos(rho * math.pi)
    x0, res0 = _fit(A0, b0, w)

    nk1, nk0 = K_F + n_poly, K_F + 1 + n_poly
    cd = CauchyData(x1[:K_F], x0[:K_F + 1], x1[nk1:], x0[nk0:], x1[K_F:nk1], x0[K_F + 1:nk0])
    held = held_out_points(n_s)
    e0, e1 = characteristic(problem, held, tol=tol)
    f0, f1 = delta_from_cauchy(cd, held)
    sc = np.maximum(1.0, np.abs(principal_sqrt(held)) ** (2 * p + 1))
    held_res = float(max(np.max(np.abs(e0 - f0) / sc), np.max(np.abs(e1 - f1) / sc)))
    residuals = {"fit_delta0": res0, "fit_delta1": res1, "held_out": held_res}
    cd = CauchyData(cd.g_coef, cd.j_coef, cd.C, cd.D, cd.g_poly, cd.j_poly, residuals)
    worst = max(residuals.values())
    if worst > fit_tol:
        raise FitResidualTooLarge(f"Cauchy data fit residual {worst:.3g} exceeds {fit_tol:g}; "
                                  f"try a larger K_F (now {K_F})")
    logger.info("Cauchy fit residuals: %s", residuals)
    return cd


def held_out_points(n_s: int, n: int = 50) -> np.ndarray:
    """Complex lam off the sample set: rho spread over ``(0, n_s / 2)``, ``|Im rho| <= 1``."""
    t = np.linspace(0.0, 1.0, n)
    rho = 0.37 + (n_s / 2.0 - 0.74) * t + 1j * np.sin(7.0 * t)
    return rho ** 2


# ---------------------------------------------------------------------------
# Spectral data from Cauchy data
# ---------------------------------------------------------------------------

def zeros_from_cauchy(cd: CauchyData, j: int, n_max: int, cluster_tol: float = 1e-7) -> np.ndarray:
    """Zeros ``theta_{n j}`` of ``Delta_j`` (repeated per multiplicity), n <= n_max."""
    loc = spectrum.locate_eigenvalues(cd, n_max, which=j, cluster_tol=cluster_tol)
    out = []
    for v, m in zip(loc.values, loc.mults):
        out.extend([v] * m)
    return np.array(out)


@dataclass(frozen=True, eq=False)
class CauchySpectral:
    """Spectral data derived from Cauchy data, relative to a model."""

    data: SpectralData
    tilde_data: SpectralData
    N: int
    mhat: WeylDiffSamples
    tail_l2: float


def spectral_from_cauchy(cd: CauchyData, tilde_cd: CauchyData | Problem, n_max: int,
                         M_q: int = 256, cluster_tol: float = 1e-7,
                         tilde_data: SpectralData | None = None) -> CauchySpectral:
    """Head Weyl difference on ``Gamma_N`` and tail data for ``n >= N``.

    ``N`` is the head index of the model data; every zero of the target with
    index below ``N`` must lie inside ``Gamma_N``.

    Raises
    ------
    HeadEscaped
        A head zero of the target lies outside ``Gamma_N``.
    """
    if tilde_data is None:
        tilde_data = spectrum.spectral_data(tilde_cd, n_max, cluster_tol=cluster_tol)
    N = inverse.choose_head_index(tilde_data, tilde_data)
    data = spectrum.spectral_data(cd, n_max, N=N, cluster_tol=cluster_tol)
    N = inverse.choose_head_index(data, tilde_data, N)
    grid = make_contour(N, cd.p, M_q)
    mhat = spectrum.weyl_diff_on_contour(data, tilde_data, grid, N)
    k = N - 1
    size = min(len(data), len(tilde_data))
    tail = np.abs(data.rho[k:size] - tilde_data.rho[k:size]) + \
        np.abs(data.weights[k:size] - tilde_data.weights[k:size])
    return CauchySpectral(data, tilde_data, N, mhat, float(np.sqrt(np.sum(tail ** 2))))


def invert_from_cauchy(tilde: Problem, cd: CauchyData, config: Config | None = None,
                       n_max: int = 40, tilde_data: SpectralData | None = None,
                       verify: bool = True) -> ReconstructionResult:
    """Recover the problem from Cauchy data, using ``tilde`` as the model.

    The Cauchy data are converted to spectral data (zeros of ``Delta1`` and
    weights from ``M = -Delta0/Delta1``) and passed to
    :func:`sturmpoly.inverse.invert`.  Verification re-extracts Cauchy data
    from the reconstruction and compares both representations at held-out
    points.
    """
    cfg = config or Config()
    if tilde_data is None:
        tilde_data = spectrum.spectral_data(tilde, n_max, cluster_tol=cfg.cluster_tol)
    cs = spectral_from_cauchy(cd, tilde, n_max, cfg.M_q, cfg.cluster_tol, tilde_data)
    result = inverse.invert(tilde, cs.data, cfg, tilde_data=tilde_data, N=cs.N, verify=verify)
    diag = dict(result.diagnostics)
    diag["cauchy_tail_l2"] = cs.tail_l2
    if verify:
        rec = cauchy_from_problem(result.problem, cd.K_F, max(cd.g_poly.size, cd.j_poly.size) or N_POLY,
                                  fit_tol=np.inf, tol=cfg.tol_ode)
        held = held_out_points(min(cd.K_F, 2 * n_max))
        a0, a1 = delta_from_cauchy(cd, held)
        b0, b1 = delta_from_cauchy(rec, held)
        sc = np.maximum(1.0, np.abs(principal_sqrt(held)) ** (2 * cd.p + 1))
        err = float(max(np.max(np.abs(a0 - b0) / sc), np.max(np.abs(a1 - b1) / sc)))
        diag["cauchy_verify_error"] = err
        if err > cfg.verify_tol:
            raise VerificationFailure(f"Cauchy data of the reconstruction differ by {err:.3g}")
    return ReconstructionResult(result.problem, diag)
