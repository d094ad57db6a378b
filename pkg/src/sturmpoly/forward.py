"""Solutions of the regularized equation and the characteristic functions.

The equation ``-y'' + q y = lam y`` with ``q = sigma'`` is integrated in
first-order form for ``(y, y1)``, ``y1 = y' - sigma y``::

    y'  = sigma y + y1
    y1' = -sigma y1 - (sigma**2 + lam) y

Every routine is vectorized over arrays of ``lam``.  All values of one call
share the same step sequence, which keeps divided differences in ``lam`` of
the numerical solutions smooth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Problem, PotentialSigma, circle, eval_poly, principal_sqrt
from .errors import NearPole, StepFailure

TOL_ODE = 1e-11
MIN_STEP = 1e-7


@dataclass(frozen=True)
class QuasiState:
    y: complex
    y1: complex


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on the x-grid.  ``y``/``y1`` have shape ``(N_x,)`` for scalar
    ``lam`` and ``(N_x, K)`` otherwise; grid order is always increasing x."""

    lam: complex | np.ndarray
    x: np.ndarray
    y: np.ndarray
    y1: np.ndarray
    extra: dict

    @property
    def states(self) -> list:
        return [QuasiState(complex(a), complex(b)) for a, b in zip(self.y, self.y1)]

    @property
    def endpoint(self) -> QuasiState:
        return QuasiState(complex(self.y[-1]), complex(self.y1[-1]))


def _rhs(s, lam, Y, variational, accumulate):
    y, y1 = Y[0], Y[1]
    out = np.empty_like(Y)
    a = s * s + lam
    out[0] = s * y + y1
    out[1] = -s * y1 - a * y
    k = 2
    if variational:
        out[2] = s * Y[2] + Y[3]
        out[3] = -s * Y[3] - a * Y[2] - y
        k = 4
    if accumulate:
        out[k] = y * y
    return out


def _rk4(Y, lam, h, svals, variational, accumulate):
    """``len(svals)//2`` classical RK4 steps; ``svals`` holds sigma at half-steps."""
    n = (len(svals) - 1) // 2
    for i in range(n):
        s0, sm, s1 = svals[2 * i], svals[2 * i + 1], svals[2 * i + 2]
        k1 = _rhs(s0, lam, Y, variational, accumulate)
        k2 = _rhs(sm, lam, Y + 0.5 * h * k1, variational, accumulate)
        k3 = _rhs(sm, lam, Y + 0.5 * h * k2, variational, accumulate)
        k4 = _rhs(s1, lam, Y + h * k3, variational, accumulate)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


def _error_norm(diff, Yb, lam, variational, accumulate):
    scale_rho = np.maximum(1.0, np.abs(principal_sqrt(lam)))
    base = np.sqrt(np.abs(Yb[0]) ** 2 + np.abs(Yb[1] / scale_rho) ** 2) + 1e-300
    err = np.sqrt(np.abs(diff[0]) ** 2 + np.abs(diff[1] / scale_rho) ** 2) / base
    k = 2
    if variational:
        vb = np.sqrt(np.abs(Yb[2]) ** 2 + np.abs(Yb[3] / scale_rho) ** 2) + base
        err = np.maximum(err, np.sqrt(np.abs(diff[2]) ** 2 + np.abs(diff[3] / scale_rho) ** 2) / vb)
        k = 4
    if accumulate:
        err = np.maximum(err, np.abs(diff[k]) / (np.abs(Yb[k]) + base ** 2 * 1e-3 + 1e-300))
    return float(np.max(err)) / 15.0


def propagate(sigma: PotentialSigma, lam, y0, y10, direction: str = "forward", *,
              store: bool = False, variational: bool = False, accumulate: bool = False,
              tol: float = TOL_ODE, dy0=None, dy10=None):
    """Integrate the quasi-derivative system for an array of ``lam``.

    Each grid cell is covered by ``n`` RK4 substeps; step doubling against
    ``2n`` substeps estimates the local error, and the accepted value is the
    Richardson-extrapolated one.  ``n`` grows until the estimate falls below
    ``tol`` and shrinks again on easy cells.

    Returns a dict with ``y``, ``y1`` (and ``dy``, ``dy1`` for the
    lam-derivatives, ``acc`` for the running integral of ``y**2``), each of
    shape ``(N_x, K)`` when ``store`` else ``(K,)`` at the far endpoint.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    K = lam.size
    rows = 2 + 2 * variational + accumulate
    Y = np.zeros((rows, K), dtype=np.complex128)
    Y[0] = y0
    Y[1] = y10
    if variational:
        Y[2] = 0.0 if dy0 is None else dy0
        Y[3] = 0.0 if dy10 is None else dy10
    x = sigma.grid_points
    spline = sigma.spline
    if direction == "forward":
        cells = range(x.size - 1)
        edges = [(x[i], x[i + 1]) for i in cells]
    elif direction == "backward":
        edges = [(x[i + 1], x[i]) for i in reversed(range(x.size - 1))]
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    hist = [Y.copy()] if store else None

    n = max(1, int(np.ceil(np.max(np.abs(principal_sqrt(lam))) * abs(x[1] - x[0]) * 2.0)))
    for a, b in edges:
        h = b - a
        while True:
            s = spline(a + h * np.linspace(0.0, 1.0, 4 * n + 1))
            Ya = _rk4(Y, lam, h / n, s[::2], variational, accumulate)
            Yb = _rk4(Y, lam, h / (2 * n), s, variational, accumulate)
            diff = Yb - Ya
            err = _error_norm(diff, Yb, lam, variational, accumulate)
            if err <= tol and np.all(np.isfinite(Yb)):
                Y = Yb + diff / 15.0
                if err < tol / 64.0 and n > 1:
                    n //= 2
                break
            n *= 2
            if abs(h) / n < MIN_STEP:
                raise StepFailure(f"cannot reach tol={tol:g} with step >= {MIN_STEP:g}")
        if store:
            hist.append(Y.copy())

    if store:
        H = np.array(hist)
        if direction == "backward":
            H = H[::-1]
        Hs = H.transpose(1, 0, 2)
    else:
        Hs = Y
    out = {"y": Hs[0], "y1": Hs[1]}
    k = 2
    if variational:
        out["dy"], out["dy1"] = Hs[2], Hs[3]
        k = 4
    if accumulate:
        out["acc"] = Hs[k]
    return out


def integrate(sigma: PotentialSigma, lam: complex, init: QuasiState,
              direction: str = "forward", tol: float = TOL_ODE) -> Trajectory:
    """Trajectory of a single solution; ``init`` is taken at 0 (forward) or pi (backward)."""
    out = propagate(sigma, [lam], init.y, init.y1, direction, store=True, tol=tol)
    return Trajectory(complex(lam), sigma.grid_points, out["y"][:, 0], out["y1"][:, 0], {})


def phi_S_at_pi(sigma: PotentialSigma, lam, derivative: bool = False, tol: float = TOL_ODE):
    """``(phi(pi), phi1(pi), S(pi), S1(pi))``; with ``derivative`` also their lam-derivatives."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    K = lam_arr.size
    both = np.concatenate([lam_arr, lam_arr])
    y0 = np.concatenate([np.ones(K), np.zeros(K)])
    y10 = np.concatenate([np.zeros(K), np.ones(K)])
    out = propagate(sigma, both, y0, y10, variational=derivative, tol=tol)
    res = (out["y"][:K], out["y1"][:K], out["y"][K:], out["y1"][K:])
    if derivative:
        res = res + (out["dy"][:K], out["dy1"][:K], out["dy"][K:], out["dy1"][K:])
    if np.ndim(lam) == 0:
        res = tuple(complex(v[0]) for v in res)
    return res


def characteristic(problem: Problem, lam, derivative: bool = False, tol: float = TOL_ODE):
    """``(Delta0, Delta1)`` and, with ``derivative``, ``(Delta0', Delta1')`` in lam."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    vals = phi_S_at_pi(problem.sigma, lam_arr, derivative, tol)
    r1 = eval_poly(problem.polys, "r1", lam_arr)
    r2 = eval_poly(problem.polys, "r2", lam_arr)
    ph, ph1, S, S1 = vals[:4]
    d1 = r1 * ph1 + r2 * ph
    d0 = r1 * S1 + r2 * S
    res = [d0, d1]
    if derivative:
        dph, dph1, dS, dS1 = vals[4:]
        c, d = problem.polys.c, problem.polys.d
        dr1 = np.polyval((c[1:] * np.arange(1, c.size))[::-1], lam_arr) if c.size > 1 else 0 * lam_arr
        dr2 = np.polyval((d[1:] * np.arange(1, d.size))[::-1], lam_arr) if d.size > 1 else 0 * lam_arr
        res.append(dr1 * S1 + r1 * dS1 + dr2 * S + r2 * dS)
        res.append(dr1 * ph1 + r1 * dph1 + dr2 * ph + r2 * dph)
    if np.ndim(lam) == 0:
        return tuple(complex(v[0]) for v in res)
    return tuple(res)


def delta(problem: Problem, lam, which: str = "Delta1", tol: float = TOL_ODE):
    """``Delta1 = r1 phi1(pi) + r2 phi(pi)`` or ``Delta0 = r1 S1(pi) + r2 S(pi)``."""
    d0, d1 = characteristic(problem, lam, tol=tol)
    return {"Delta0": d0, "Delta1": d1, "0": d0, "1": d1}[str(which)]


def pole_scale(lam, p: int):
    return np.maximum(1.0, np.abs(lam) ** (p + 1))


def weyl(problem: Problem, lam, tol: float = TOL_ODE):
    """``M = -Delta0 / Delta1``; raises :class:`NearPole` where ``Delta1`` vanishes."""
    d0, d1 = characteristic(problem, lam, tol=tol)
    if np.any(np.abs(d1) < 1e-12 * pole_scale(lam, problem.p)):
        raise NearPole(f"Delta1 vanishes to working precision near lam={lam}")
    return -d0 / d1


def psi_at_zero(problem: Problem, lam, tol: float = TOL_ODE):
    """``psi(0, lam)`` for ``psi(pi) = r1(lam)``, ``psi1(pi) = -r2(lam)``."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    out = propagate(problem.sigma, lam_arr, eval_poly(problem.polys, "r1", lam_arr),
                    -eval_poly(problem.polys, "r2", lam_arr), "backward", tol=tol)
    return complex(out["y"][0]) if np.ndim(lam) == 0 else out["y"]


def boundary_defect(problem: Problem, lam, tol: float = TOL_ODE):
    """``f = r1 + M Delta1 phi(pi) = r1 - psi(0) phi(pi)``.

    ``f`` vanishes at every eigenvalue to at least its multiplicity: there
    ``psi = beta phi`` with ``beta = psi(0)`` and ``psi(pi) = r1``.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    ph = phi_S_at_pi(problem.sigma, lam_arr, tol=tol)[0]
    out = eval_poly(problem.polys, "r1", lam_arr) - psi_at_zero(problem, lam_arr, tol) * ph
    return complex(out[0]) if np.ndim(lam) == 0 else out


def analytic_derivative(f, lam0: complex, order: int, radius: float, M_q: int = 64):
    """``f^(j)(lam0)`` by the Cauchy integral formula on a trapezoidal circle.

    ``f`` must accept an array of points.
    """
    g = circle(lam0, radius, M_q)
    vals = np.asarray(f(g.nodes))
    integrand = vals / (g.nodes - lam0) ** (order + 1)
    return math.factorial(order) * (integrand @ g.weights) / (2j * math.pi)
