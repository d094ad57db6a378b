"""Main equation on the head contour and reconstruction of (sigma, r1, r2).

The contour integrals of the main equation are discretized by the trapezoid
rule on the nodes of ``Gamma_N``.  Differences of the spectral data beyond
the head (indices ``N <= n < N'``) enter through the residues at the simple
poles ``lam_n`` and ``tilde lam_n``; this is the same integral taken over the
enlarged contour ``Gamma_N'``, evaluated exactly.  Every integral is thus a
sum ``sum_k c_k F(zeta_k)`` over a fixed list of points ``zeta_k``:

* contour nodes, ``c_k = w_k * Mhat(mu_k) / (2 pi i)``;
* target tail eigenvalues, ``c_k = alpha_n``;
* model tail eigenvalues, ``c_k = -tilde alpha_n``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .config import Config
from .core import (BoundaryPolynomials, ContourGrid, PotentialSigma, Problem, ReconstructionResult,
                   SpectralData, WeylDiffSamples, contour_radius, eval_poly, make_contour,
                   principal_sqrt)
from .errors import (CountMismatch, DegreeViolation, HeadEscaped, IllConditioned, PoleOnContour,
                     SolverError, VerificationFailure)
from .forward import propagate
from . import spectrum

logger = logging.getLogger(__name__)

NEAR_PAIR = 1e-6
TOL_CHECK = 1e-12


@dataclass(frozen=True, eq=False)
class QuadratureSet:
    """Points ``zeta_k`` and coefficients ``c_k`` of the discretized integrals."""

    points: np.ndarray
    coef: np.ndarray
    n_nodes: int
    grid: ContourGrid
    mhat: WeylDiffSamples


@dataclass(frozen=True, eq=False)
class KernelTables:
    """Model solutions ``tilde phi``, ``tilde phi^[1]`` on the x-grid at every point.

    ``diag[i, k]`` is ``int_0^{x_i} tilde phi(t, zeta_k)**2 dt``; off-diagonal
    kernel values follow from the Lagrange identity (see :meth:`D`).
    """

    x_grid: np.ndarray
    points: np.ndarray
    phi_tilde: np.ndarray
    phi_tilde_q: np.ndarray
    diag: np.ndarray

    def D(self, i: int) -> np.ndarray:
        """``tilde D(x_i, zeta_j, zeta_k) = int_0^{x_i} tilde phi(t, zeta_j) tilde phi(t, zeta_k) dt``.

        Uses ``(phi_j phi1_k - phi1_j phi_k) / (zeta_j - zeta_k)``; the diagonal
        and nearly coincident pairs use the integral form (the average of the
        two diagonal values is second-order accurate in the separation).
        """
        z = self.points
        ph, pq, dg = self.phi_tilde[i], self.phi_tilde_q[i], self.diag[i]
        diff = z[:, None] - z[None, :]
        near = np.abs(diff) <= NEAR_PAIR * (1.0 + np.abs(principal_sqrt(z)))[:, None]
        num = ph[:, None] * pq[None, :] - pq[:, None] * ph[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / diff
        avg = 0.5 * (dg[:, None] + dg[None, :])
        return np.where(near, avg, out)


@dataclass(frozen=True, eq=False)
class MainEquationSolve:
    x_index: int
    phi: np.ndarray
    condition_estimate: float
    residual: float


def build_kernel_tables(sigma_tilde: PotentialSigma, points, tol: float = 1e-11) -> KernelTables:
    points = np.asarray(points, dtype=np.complex128)
    out = propagate(sigma_tilde, points, 1.0, 0.0, store=True, accumulate=True, tol=tol)
    return KernelTables(sigma_tilde.grid_points, points, out["y"], out["y1"], out["acc"])


def build_Q(i: int, tables: KernelTables, coef: np.ndarray) -> np.ndarray:
    """Nystrom matrix ``Q[j, k] = c_k * tilde D(x_i, zeta_j, zeta_k)``."""
    return tables.D(i) * coef[None, :]


def _solve(A: np.ndarray, rhs: np.ndarray, cond_floor: float, where: str):
    lu = lu_factor(A, check_finite=False)
    anorm = float(np.max(np.sum(np.abs(A), axis=0)))
    rcond, info = lapack.zgecon(lu[0], anorm, norm="1")
    if info != 0 or not rcond > cond_floor:
        raise IllConditioned(f"main equation {where}: reciprocal condition {rcond:.3g} "
                             f"below floor {cond_floor:g}")
    sol = lu_solve(lu, rhs, check_finite=False)
    sol = sol + lu_solve(lu, rhs - A @ sol, check_finite=False)
    res = float(np.max(np.abs(A @ sol - rhs)) / max(1.0, float(np.max(np.abs(rhs)))))
    return sol, float(rcond), res


def solve_main_equation(i: int, tables: KernelTables, coef: np.ndarray,
                        cond_floor: float = 1e-10) -> MainEquationSolve:
    """Solve ``(I + Q(x_i)) phi = tilde phi(x_i, .)``."""
    A = np.eye(coef.size, dtype=np.complex128) + build_Q(i, tables, coef)
    phi, rc, res = _solve(A, tables.phi_tilde[i], cond_floor, f"at x={tables.x_grid[i]:.6g}")
    return MainEquationSolve(i, phi, rc, res)


def reconstruct_sigma(sigma_tilde: PotentialSigma, tables: KernelTables, solves: list,
                      coef: np.ndarray) -> PotentialSigma:
    """``sigma = tilde sigma - sum_k c_k (2 tilde phi_k phi_k - 1)`` on the x-grid."""
    phi = np.array([s.phi for s in solves])
    hat = -((2.0 * tables.phi_tilde * phi - 1.0) @ coef)
    return PotentialSigma(sigma_tilde.grid_points, sigma_tilde.values + hat)


def phi_quasi_at_pi(tables: KernelTables, solve_pi: MainEquationSolve, coef: np.ndarray,
                    sigma_hat_pi: complex, cond_floor: float = 1e-10) -> np.ndarray:
    """``phi^[1](pi, zeta_k)``.

    Solves ``(I + Q(pi)) z = tilde phi^[1](pi) - tilde phi(pi) * sum_k c_k tilde phi_k phi_k``
    and returns ``z - sigma_hat(pi) * phi(pi)``.
    """
    i = solve_pi.x_index
    ph = tables.phi_tilde[i]
    A = np.eye(coef.size, dtype=np.complex128) + build_Q(i, tables, coef)
    rhs = tables.phi_tilde_q[i] - ph * np.sum(coef * ph * solve_pi.phi)
    z, _, _ = _solve(A, rhs, cond_floor, "for the quasi-derivative at pi")
    return z - sigma_hat_pi * solve_pi.phi


def Z_Y(lam, tilde: Problem, tables: KernelTables, coef: np.ndarray, phi_pi: np.ndarray,
        phi1_pi: np.ndarray):
    """The functions ``Z`` and ``Y`` whose ratio is ``r2 / r1``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    ph, pq = tables.phi_tilde[-1], tables.phi_tilde_q[-1]
    r1 = eval_poly(tilde.polys, "r1", lam)
    r2 = eval_poly(tilde.polys, "r2", lam)
    A = (r1[:, None] * pq[None, :] + r2[:, None] * ph[None, :]) / (lam[:, None] - tables.points[None, :])
    Z = r1 - A @ (coef * phi_pi)
    Y = r2 - r1 * np.sum(coef * (ph * phi_pi - 1.0)) + A @ (coef * phi1_pi)
    return Z, Y


def _product(lam, target_head: np.ndarray, tilde_head: np.ndarray):
    out = np.ones_like(lam)
    for a, b in zip(target_head, tilde_head):
        out = out * (lam - a) / (lam - b)
    return out


def reconstruct_polynomials(tilde: Problem, tables: KernelTables, coef: np.ndarray,
                            phi_pi: np.ndarray, phi1_pi: np.ndarray, target_head, tilde_head,
                            fit_radius: float):
    """Fit ``g1 = prod * Z`` (monic, degree p) and ``g2 = prod * Y`` (degree <= p).

    Returns the polynomials and a dict of fit diagnostics.  The product runs
    over all eigenvalues (with multiplicity) handled by residues or the
    contour, so ``g1``, ``g2`` are polynomials.
    """
    p = tilde.p
    n_s = 4 * (p + 1)
    lam = fit_radius * np.exp(2j * math.pi * (np.arange(n_s) + 0.5) / n_s)
    Z, Y = Z_Y(lam, tilde, tables, coef, phi_pi, phi1_pi)
    prod = _product(lam, np.asarray(target_head), np.asarray(tilde_head))
    g1, g2 = prod * Z, prod * Y
    u = lam / fit_radius
    V = np.vander(u, p + 1, increasing=True)
    s = fit_radius ** np.arange(p + 1)
    c_u, *_ = np.linalg.lstsq(V, g1, rcond=None)
    d_u, *_ = np.linalg.lstsq(V, g2, rcond=None)
    scale1 = max(1.0, float(np.max(np.abs(g1))))
    scale2 = max(1.0, float(np.max(np.abs(g1))), float(np.max(np.abs(g2))))
    res1 = float(np.max(np.abs(V @ c_u - g1))) / scale1
    res2 = float(np.max(np.abs(V @ d_u - g2))) / scale2
    c, d = c_u / s, d_u / s
    lead_dev = abs(c[-1] - 1.0)
    diag = {"fit_residual_r1": res1, "fit_residual_r2": res2, "leading_deviation": float(lead_dev)}
    if res1 > 1e-7 or res2 > 1e-7:
        raise DegreeViolation(f"g1/g2 are not polynomials of degree {p}: "
                              f"fit residuals {res1:.3g}, {res2:.3g}")
    if lead_dev > 1e-8:
        raise DegreeViolation(f"leading coefficient of g1 is {c[-1]}, expected 1")
    c, d = c / c[-1], d / c[-1]
    c[-1] = 1.0
    return BoundaryPolynomials(c, d), diag


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def choose_head_index(data: SpectralData, tilde_data: SpectralData, N: int | None = None) -> int:
    """Smallest admissible ``N`` with both heads inside and both tails outside ``Gamma_N``."""
    p = data.p
    start = max(p + 2, data.N, tilde_data.N) if N is None else N
    size = min(len(data), len(tilde_data))
    for n in range(start, size + 1):
        k = n - 1
        if any(s < k < s + m for d in (data, tilde_data) for s, m in d.clusters):
            continue
        if any(s + 1 >= n and m > 1 for d in (data, tilde_data) for s, m in d.clusters):
            continue
        R = contour_radius(n, p)
        ok = all(np.all(np.abs(d.eigenvalues[:k]) < R * (1 - 1e-6)) and
                 np.all(np.abs(d.eigenvalues[k:]) > R * (1 + 1e-6)) for d in (data, tilde_data))
        if ok:
            return n
        if N is not None:
            break
    if N is not None:
        raise HeadEscaped(f"N={N}: heads are not separated from the tails by Gamma_N")
    raise CountMismatch("no contour index separates the heads from the tails")


def tail_cut(data: SpectralData, tilde_data: SpectralData, N: int, tail_tol: float) -> int:
    """``N'``: tail differences at indices ``>= N'`` have l2 norm below ``tail_tol``."""
    size = min(len(data), len(tilde_data))
    d = np.abs(data.rho[:size] - tilde_data.rho[:size]) ** 2 + \
        np.abs(data.weights[:size] - tilde_data.weights[:size]) ** 2
    tail = np.sqrt(np.cumsum(d[::-1])[::-1])
    Np = N
    for n in range(size, N - 1, -1):
        if tail[n - 1] >= tail_tol:
            Np = n + 1
            break
    return Np


def quadrature_set(data: SpectralData, tilde_data: SpectralData, N: int, N_tail: int,
                   M_q: int) -> QuadratureSet:
    grid = make_contour(N, data.p, M_q)
    mhat = spectrum.weyl_diff_on_contour(data, tilde_data, grid, N)
    pts = [grid.nodes]
    coef = [grid.weights * mhat.values / (2j * math.pi)]
    k = np.arange(N - 1, N_tail - 1)
    same = (data.eigenvalues[k] == tilde_data.eigenvalues[k]) & (data.weights[k] == tilde_data.weights[k])
    k = k[~same]
    pts += [data.eigenvalues[k], tilde_data.eigenvalues[k]]
    coef += [data.weights[k], -tilde_data.weights[k]]
    return QuadratureSet(np.concatenate(pts), np.concatenate(coef), M_q, grid, mhat)


def invert(tilde: Problem, data: SpectralData, config: Config | None = None, *,
           tilde_data: SpectralData | None = None, N: int | None = None,
           verify: bool = True) -> ReconstructionResult:
    """Recover ``(sigma, r1, r2)`` from spectral data, using ``tilde`` as the model problem.

    Parameters
    ----------
    tilde : Problem
        Model problem; its sigma grid is resampled to ``config.N_x`` points.
    data : SpectralData
        Target eigenvalues and weight numbers.  Beyond the stored range the
        target is taken to coincide with the model.
    tilde_data : SpectralData, optional
        Spectral data of ``tilde``; computed with the same length as ``data``
        when omitted.
    N : int, optional
        Head contour index; chosen automatically by default.

    Raises
    ------
    IllConditioned
        The main equation is (numerically) singular at some ``x``.
    VerificationFailure
        The forward spectrum of the reconstruction misses the target.
    """
    cfg = config or Config()
    st = main_equation_state(tilde, data, cfg, tilde_data=tilde_data, N=N)
    tilde, tilde_data, qs, tables = st.tilde, st.tilde_data, st.quad, st.tables
    N, N_tail = st.N, st.N_tail
    k = N_tail - 1
    fit_radius = 2.0 * max(contour_radius(N_tail, data.p),
                           float(np.max(np.abs(data.eigenvalues[:k]), initial=0.0)),
                           float(np.max(np.abs(tilde_data.eigenvalues[:k]), initial=0.0)))
    polys, fit = reconstruct_polynomials(tilde, tables, qs.coef, st.phi_pi, st.phi1_pi,
                                         data.eigenvalues[:k], tilde_data.eigenvalues[:k],
                                         fit_radius)
    problem = Problem(st.sigma, polys)
    conds = np.array([s.condition_estimate for s in st.solves])
    diagnostics = {
        "N": N, "N_tail": N_tail, "M_q": cfg.M_q, "N_x": cfg.N_x,
        "delta1": qs.mhat.delta1_norm,
        "tail_l2": float(np.sqrt(np.sum(np.abs(data.rho[N - 1:k] - tilde_data.rho[N - 1:k]) ** 2 +
                                        np.abs(data.weights[N - 1:k] - tilde_data.weights[N - 1:k]) ** 2))),
        "n_points": int(qs.points.size),
        "x": tables.x_grid.tolist(),
        "condition": conds.tolist(),
        "min_condition": float(conds.min()),
        "main_residual": float(max(s.residual for s in st.solves)),
        "sigma_hat_sup": float(np.max(np.abs(st.sigma.values - tilde.sigma.values))),
        **fit,
    }
    if verify:
        diagnostics.update(verify_reconstruction(problem, data, N_tail, cfg))
    return ReconstructionResult(problem, diagnostics)


@dataclass(frozen=True, eq=False)
class InversionState:
    """Intermediate quantities of one inversion, before the polynomial fit."""

    tilde: Problem
    data: SpectralData
    tilde_data: SpectralData
    N: int
    N_tail: int
    quad: QuadratureSet
    tables: KernelTables
    solves: list
    sigma: PotentialSigma
    phi_pi: np.ndarray
    phi1_pi: np.ndarray

    def Z_Y(self, lam):
        return Z_Y(lam, self.tilde, self.tables, self.quad.coef, self.phi_pi, self.phi1_pi)


def main_equation_state(tilde: Problem, data: SpectralData, config: Config | None = None, *,
                        tilde_data: SpectralData | None = None,
                        N: int | None = None) -> InversionState:
    """Solve the main equation on the x-grid and recover sigma, phi(pi), phi1(pi)."""
    cfg = config or Config()
    if tilde.p != data.p:
        raise CountMismatch(f"degree mismatch: model p={tilde.p}, data p={data.p}")
    if tilde.sigma.n_x != cfg.N_x:
        tilde = Problem(tilde.sigma.resample(cfg.N_x), tilde.polys)
    if tilde_data is None:
        tilde_data = spectrum.spectral_data(tilde, len(data), cluster_tol=cfg.cluster_tol)
    N = choose_head_index(data, tilde_data, N)
    N_tail = tail_cut(data, tilde_data, N, cfg.tail_tol)
    qs = quadrature_set(data, tilde_data, N, N_tail, cfg.M_q)
    logger.info("invert: N=%d N'=%d points=%d delta1=%.3g", N, N_tail, qs.points.size,
                qs.mhat.delta1_norm)
    tables = build_kernel_tables(tilde.sigma, qs.points, cfg.tol_ode)
    solves = [solve_main_equation(i, tables, qs.coef, cfg.cond_floor)
              for i in range(tables.x_grid.size)]
    sigma = reconstruct_sigma(tilde.sigma, tables, solves, qs.coef)
    sigma_hat_pi = sigma.values[-1] - tilde.sigma.values[-1]
    phi1_pi = phi_quasi_at_pi(tables, solves[-1], qs.coef, sigma_hat_pi, cfg.cond_floor)
    return InversionState(tilde, data, tilde_data, N, N_tail, qs, tables, solves, sigma,
                          solves[-1].phi, phi1_pi)


def z_vanishing_residuals(state: InversionState, radius: float = 1e-2) -> list:
    """Taylor coefficients ``|Z^<k>(tilde lam_n)| / k!`` for ``n < N``, ``k < m_n - m'_n``.

    ``m'_n`` is the multiplicity of ``tilde lam_n`` among the target eigenvalues
    (usually zero); a shared eigenvalue cancels in the product factor.

    The contour sum for ``Z`` at a point inside ``Gamma_N`` picks up the pole
    of its integrand at ``mu = lam``.  The function of interest is the
    continuation of ``Z`` from outside the contour,
    ``Z_out = Z_in - tilde Delta1 * phi(pi) * Mhat``, where ``phi(pi, lam)``
    comes from the main equation and ``Mhat`` from the principal parts of
    the two data sets.  Returns ``(lam, k, |coef|, scale)`` tuples with
    ``scale = max(1, |tilde r1(lam)|, |tilde r2(lam)|)``.
    """
    from .forward import analytic_derivative, characteristic
    td, data, tab, coef = state.tilde_data, state.data, state.tables, state.quad.coef
    others = np.concatenate([data.eigenvalues, td.eigenvalues])
    ph_k, pq_k = tab.phi_tilde[-1], tab.phi_tilde_q[-1]

    def z_out(lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
        Z = state.Z_Y(lam)[0]
        out = propagate(state.tilde.sigma, lam, 1.0, 0.0, tol=TOL_CHECK)
        ph, pq = out["y"], out["y1"]
        Dk = (ph[:, None] * pq_k[None, :] - pq[:, None] * ph_k[None, :]) / (lam[:, None] - tab.points[None, :])
        phi = ph - Dk @ (coef * state.phi_pi)
        mhat = (spectrum.weyl_partial(data, state.N_tail, lam)
                - spectrum.weyl_partial(td, state.N_tail, lam))
        d1 = characteristic(state.tilde, lam)[1]
        return Z - d1 * phi * mhat

    res = []
    for s, m, v, _w in td.distinct():
        if s + 1 >= state.N:
            continue
        dist = np.abs(others - v)
        # a target eigenvalue at the same point cancels in the product factor
        shared = int(np.sum(np.abs(data.eigenvalues - v) <= 1e-12 * (1 + abs(v))))
        dist = dist[dist > 1e-12 * (1 + abs(v))]
        r = min(radius, 0.4 * float(dist.min()) if dist.size else radius)
        scale = max(1.0, abs(complex(eval_poly(state.tilde.polys, "r1", v))),
                    abs(complex(eval_poly(state.tilde.polys, "r2", v))))
        for k in range(m - shared):
            c = analytic_derivative(z_out, v, k, r) / math.factorial(k)
            res.append((v, k, abs(c), scale))
    return res


def verify_reconstruction(problem: Problem, data: SpectralData, N_tail: int, cfg: Config) -> dict:
    """Compare the forward spectrum of ``problem`` with ``data`` for indices below ``N_tail``.

    Each target cluster is enclosed in a small circle; the zero count,
    zero centroid and Laurent moments of the Weyl function on that circle
    are compared with the target multiplicity, eigenvalue and weights.
    """
    src = spectrum.as_source(problem)
    clusters = list(data.distinct())
    values = [c[2] for c in clusters]
    idx = [i for i, c in enumerate(clusters) if c[0] + 1 < N_tail]
    got_all = {}
    # simple clusters sit at >= 2.5 radii from other poles; 32 nodes suffice
    for sel, M in ((lambda m: m == 1, 32), (lambda m: m > 1, 64)):
        part = [i for i in idx if sel(clusters[i][1])]
        res = spectrum.cluster_moments_many(
            src, [values[i] for i in part], [clusters[i][1] for i in part],
            [spectrum._cluster_radius(values, i) for i in part], M)
        got_all.update(zip(part, res))
    lam_err = alpha_err = 0.0
    for i in idx:
        got = got_all[i]
        s, m, v, w = clusters[i]
        if got["count"] != m:
            raise VerificationFailure(f"reconstruction has {got['count']} eigenvalues near {v}, expected {m}")
        lam_err = max(lam_err, abs(got["centroid"] - v))
        scale = max(float(np.max(np.abs(w))), 1e-300)
        alpha_err = max(alpha_err, float(np.max(np.abs(got["alpha"] - w))) / scale)
    out = {"verify_lambda_error": lam_err, "verify_alpha_error": alpha_err,
           "verify_passed": bool(lam_err <= cfg.verify_tol and alpha_err <= cfg.verify_tol)}
    if not out["verify_passed"]:
        raise VerificationFailure(f"forward spectrum misses the target: lambda error {lam_err:.3g}, "
                                  f"weight error {alpha_err:.3g}")
    return out
