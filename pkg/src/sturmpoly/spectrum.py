"""Eigenvalues with multiplicities, weight numbers, and Weyl-function sums.

Zeros inside the head contour are isolated with argument-principle power
sums (Delves-Lyness) and recursive shrinking of disks; a group of zeros
whose spread cannot be resolved above the noise floor, or is below
``cluster_tol``, is reported as one eigenvalue of the group's multiplicity.
Tail eigenvalues are refined by Newton's method from the asymptotic seeds
``sqrt(lam_n) ~ n - p - 1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (CauchyData, ContourGrid, Problem, SpectralData, WeylDiffSamples, circle,
                   principal_sqrt)
from .errors import (CountMismatch, CrossCheckFailure, HeadEscaped, HeadTooLarge,
                     NewtonDivergence, NonIntegerWinding, PoleOnContour, ZeroOnContour)
from .forward import characteristic

logger = logging.getLogger(__name__)

CLUSTER_TOL = 1e-7
MAX_HEAD_EXTRA = 12


# ---------------------------------------------------------------------------
# Characteristic-function sources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Source:
    """Vectorized access to ``(Delta0, Delta1)`` and their lam-derivatives."""

    func: Callable
    p: int

    def __call__(self, lam, derivative: bool = False):
        return self.func(np.atleast_1d(np.asarray(lam, dtype=np.complex128)), derivative)

    def f(self, which: int) -> Callable:
        return lambda lam: self(lam)[which]

    def f_df(self, which: int) -> Callable:
        def fd(lam):
            d0, d1, dd0, dd1 = self(lam, True)
            return (d0, dd0) if which == 0 else (d1, dd1)
        return fd


def as_source(obj) -> Source:
    if isinstance(obj, Source):
        return obj
    if isinstance(obj, Problem):
        return Source(lambda lam, der: characteristic(obj, lam, der), obj.p)
    if isinstance(obj, CauchyData):
        from .cauchy import cauchy_characteristic
        return Source(lambda lam, der: cauchy_characteristic(obj, lam, der), obj.p)
    raise TypeError(f"cannot evaluate characteristic functions of {type(obj).__name__}")


# ---------------------------------------------------------------------------
# Argument principle
# ---------------------------------------------------------------------------

def winding_number(values: np.ndarray) -> float:
    ratio = np.roll(values, -1) / values
    return float(np.sum(np.angle(ratio)) / (2.0 * math.pi))


def count_zeros(f: Callable, center: complex = 0.0, radius: float = 1.0, M: int = 256) -> int:
    """Winding number of ``f`` along the circle, refined until phase steps are small."""
    while True:
        g = circle(center, radius, M)
        vals = np.asarray(f(g.nodes), dtype=np.complex128) * np.ones(M)
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.min(np.abs(vals)) < 1e-10 * scale:
            raise ZeroOnContour(f"f vanishes near the circle |lam - {center}| = {radius}")
        steps = np.abs(np.angle(np.roll(vals, -1) / vals))
        if np.max(steps) < math.pi / 3:
            break
        if M >= 1 << 14:
            raise NonIntegerWinding(f"phase of f not resolved on |lam - {center}| = {radius} "
                                    f"with {M} nodes (branch cut or zero near the circle)")
        M *= 2
    w = winding_number(vals)
    k = int(round(w))
    if abs(w - k) > 0.1:
        raise NonIntegerWinding(f"winding number {w:.4f} is not an integer")
    return k


def _power_sums(fd: Callable, center: complex, radius: float, m: int, M: int = 256):
    g = circle(center, radius, M)
    f, df = fd(g.nodes)
    if np.min(np.abs(f)) < 1e-13 * max(1.0, float(np.max(np.abs(f)))):
        raise ZeroOnContour("zero on an isolation circle")
    z = (g.nodes - center) / radius
    ratio = df / f
    w = np.angle(np.roll(f, -1) / f).sum() / (2 * math.pi)
    sums = np.array([(z ** k * ratio) @ g.weights / (2j * math.pi) for k in range(m + 1)])
    return sums, int(round(w))


def _roots_from_sums(s: np.ndarray, m: int) -> np.ndarray:
    e = np.zeros(m + 1, dtype=np.complex128)
    e[0] = 1.0
    for k in range(1, m + 1):
        acc = 0.0
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * s[i]
        e[k] = acc / k
    coeffs = [(-1) ** k * e[k] for k in range(m + 1)]
    return np.roots(coeffs) if m > 0 else np.array([])


def _newton(fd: Callable, lam0, maxit: int = 50):
    """Vectorized Newton iteration; returns the roots and the last step sizes."""
    lam = np.atleast_1d(np.asarray(lam0, dtype=np.complex128)).copy()
    step = np.full(lam.shape, np.inf)
    active = np.ones(lam.shape, dtype=bool)
    for _ in range(maxit):
        f, df = fd(lam[active])
        dl = f / df
        if not np.all(np.isfinite(dl)):
            raise NewtonDivergence("Newton step is not finite")
        idx = np.flatnonzero(active)
        new_step = np.abs(dl)
        lam[idx] -= dl
        done = (new_step < 1e-12 * (1 + np.abs(lam[idx]))) | (new_step >= 0.5 * step[idx])
        step[idx] = new_step
        active[idx[done]] = False
        if not active.any():
            break
    return lam, step


def _match(a: np.ndarray, b: np.ndarray) -> float:
    b = list(b)
    worst = 0.0
    for x in a:
        j = int(np.argmin([abs(x - y) for y in b]))
        worst = max(worst, abs(x - b[j]))
        b.pop(j)
    return worst


def _resolve(fd: Callable, center: complex, radius: float, m: int, cluster_tol: float,
             depth: int = 0) -> list:
    """Distinct zeros ``(lam, multiplicity)`` of a disk known to hold ``m`` zeros."""
    if m == 0:
        return []
    s, w = _power_sums(fd, center, radius, m)
    if w != m:
        raise CountMismatch(f"disk at {center} radius {radius:g}: expected {m} zeros, found {w}")
    roots = center + radius * _roots_from_sums(s, m)
    if m == 1:
        lam, step = _newton(fd, roots)
        if abs(lam[0] - center) > radius:
            lam = roots
        return [(complex(lam[0]), 1)]

    tau = 1e-2 * radius
    groups = _single_linkage(roots, tau)
    if len(groups) == 1:
        c = center + radius * s[1] / m
        spread = float(np.max(np.abs(roots - c)))
        if spread <= cluster_tol or depth > 40:
            return [(complex(c), m)]
        r2 = max(4.0 * spread, 1e-14 * (1 + abs(c)))
        try:
            s2, w2 = _power_sums(fd, c, r2, m)
        except ZeroOnContour:
            return [(complex(c), m)]
        if w2 != m:
            return [(complex(c), m)]
        roots2 = c + r2 * _roots_from_sums(s2, m)
        if _match(roots, roots2) > 0.25 * spread:
            logger.debug("zeros near %s unresolved at spread %.3g; reporting a cluster", c, spread)
            return [(complex(c), m)]
        return _resolve(fd, c, r2, m, cluster_tol, depth + 1)

    out = []
    for grp in groups:
        pts = roots[grp]
        gc = complex(pts.mean())
        others = np.delete(roots, grp)
        gr = 0.45 * float(np.min(np.abs(others - gc)))
        gspread = float(np.max(np.abs(pts - gc)))
        if gr <= 2 * gspread:
            gr = 3 * gspread + 1e-14
        out.extend(_resolve(fd, gc, gr, len(grp), cluster_tol, depth + 1))
    return out


def _single_linkage(pts: np.ndarray, tau: float) -> list:
    n = len(pts)
    label = list(range(n))

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(pts[i] - pts[j]) < tau:
                label[find(i)] = find(j)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Located:
    values: list          # distinct eigenvalues, sorted
    mults: list
    N: int
    shift: float


def head_radius(N: int, shift: float) -> float:
    """Radius of the head contour; ``shift = p + 1`` gives ``(N - p - 3/2)**2``."""
    return (N - shift - 0.5) ** 2


def choose_N(f: Callable, shift: float, n_cap: int | None = None) -> int:
    N = int(math.floor(shift + 0.5)) + 1
    while N - shift - 0.5 <= 0:
        N += 1
    first = N
    limit = first + MAX_HEAD_EXTRA if n_cap is None else min(first + MAX_HEAD_EXTRA, n_cap)
    counts = {}

    def cnt(k):
        if k not in counts:
            counts[k] = count_zeros(f, 0.0, head_radius(k, shift))
        return counts[k]

    while N <= limit:
        if cnt(N) == N - 1 and cnt(N + 1) == N:
            return N
        N += 1
    raise HeadTooLarge(f"no admissible head index N <= {limit}")


def locate_eigenvalues(source, n_max: int, which: int = 1, N: int | None = None,
                       cluster_tol: float = CLUSTER_TOL) -> Located:
    """Zeros of ``Delta1`` (``which=1``) or ``Delta0`` (``which=0``).

    The head (zeros inside the contour of index ``N``) is resolved with
    multiplicities, the tail ``N <= n <= n_max`` by Newton's method.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    src = as_source(source)
    shift = src.p + (1.0 if which == 1 else 0.5)
    f, fd = src.f(which), src.f_df(which)
    if N is None:
        N = choose_N(f, shift)
    R = head_radius(N, shift)
    count = count_zeros(f, 0.0, R)
    if count != N - 1:
        raise CountMismatch(f"{count} zeros inside the head contour, expected {N - 1}")
    head = _resolve(fd, 0.0, R, count, cluster_tol) if count else []
    head.sort(key=lambda vm: _key(vm[0]))
    values = [v for v, _ in head]
    mults = [m for _, m in head]

    if n_max >= N:
        n = np.arange(N, n_max + 1)
        seeds = (n - shift) ** 2 + 0j
        lam, step = _newton(fd, seeds)
        bad = step > 1e-7 * (1 + np.abs(lam))
        if np.any(bad):
            raise NewtonDivergence(f"Newton did not converge for n = {n[bad].tolist()}")
        rho = principal_sqrt(lam)
        off = np.abs(rho - (n - shift))
        if np.any(off >= 0.5) or np.any(np.abs(lam) <= R):
            raise NewtonDivergence(f"tail root left its asymptotic window for n = {n[off >= 0.5].tolist()}")
        values.extend(complex(v) for v in lam)
        mults.extend([1] * lam.size)
    return Located(values, mults, N, shift)


def _key(lam: complex):
    rho = complex(principal_sqrt(lam))
    return (abs(rho), math.atan2(rho.imag, rho.real), lam.real, lam.imag)


# ---------------------------------------------------------------------------
# Weight numbers
# ---------------------------------------------------------------------------

def _cluster_radius(values: list, i: int, cap: float = 0.5) -> float:
    others = [abs(values[i] - v) for j, v in enumerate(values) if j != i]
    return min(0.4 * min(others), cap) if others else cap


def weight_numbers(source, values: list, mults: list, n_head: int | None = None,
                   M: int = 64, check_tol: float = 1e-7) -> list:
    """Weight blocks ``[alpha_n, ..., alpha_{n+m-1}]`` for each distinct eigenvalue.

    Head clusters (the first ``n_head`` distinct values, all by default) use
    the contour moments ``(1/2 pi i) oint (lam - lam_n)**k M(lam) dlam``;
    every simple eigenvalue also gets the ratio ``-Delta0 / Delta1'``, and the
    two must agree where both are computed.
    """
    src = as_source(source)
    n_head = len(values) if n_head is None else n_head
    blocks: list = [None] * len(values)

    simple = [i for i, m in enumerate(mults) if m == 1]
    ratio = {}
    if simple:
        lam = np.array([values[i] for i in simple])
        d0, d1, dd0, dd1 = src(lam, True)
        for i, r in zip(simple, -d0 / dd1):
            ratio[i] = complex(r)

    circles = []
    for i in range(min(n_head, len(values))):
        circles.append((i, circle(values[i], _cluster_radius(values, i), M)))
    if circles:
        nodes = np.concatenate([g.nodes for _, g in circles])
        d0, d1 = src(nodes)[:2]
        Mvals = -d0 / d1
        for k, (i, g) in enumerate(circles):
            mv = Mvals[k * M:(k + 1) * M]
            z = g.nodes - values[i]
            blk = [complex((z ** j * mv) @ g.weights / (2j * math.pi)) for j in range(mults[i])]
            if i in ratio:
                a, b = blk[0], ratio[i]
                if abs(a - b) > check_tol * max(abs(b), 1.0):
                    raise CrossCheckFailure(f"weight at {values[i]}: contour {a} vs ratio {b}")
                blk = [b]
            blocks[i] = blk
    for i in simple:
        if blocks[i] is None:
            blocks[i] = [ratio[i]]
    return blocks


def spectral_data(source, n_max: int, N: int | None = None,
                  cluster_tol: float = CLUSTER_TOL) -> SpectralData:
    """Eigenvalues, multiplicities and weights with indices up to ``n_max`` (plus the full head)."""
    src = as_source(source)
    loc = locate_eigenvalues(src, n_max, 1, N, cluster_tol)
    n_head = sum(1 for v in loc.values if abs(v) < head_radius(loc.N, loc.shift))
    blocks = weight_numbers(src, loc.values, loc.mults, n_head)
    return SpectralData.from_clusters(loc.values, loc.mults, blocks, src.p, loc.N)


# ---------------------------------------------------------------------------
# Weyl sums
# ---------------------------------------------------------------------------

def weyl_partial(data: SpectralData, N: int, lam):
    """``M_N(lam) = sum_{n < N} sum_k alpha_{n+k} / (lam - lam_n)**(k+1)``."""
    lam = np.asarray(lam, dtype=np.complex128)
    out = np.zeros_like(lam)
    for s, m, v, w in data.distinct():
        if s + 1 >= N:
            continue
        for k in range(m):
            out = out + w[k] / (lam - v) ** (k + 1)
    return out


def weyl_diff_on_contour(data: SpectralData, tilde_data: SpectralData, grid: ContourGrid,
                         N: int | None = None) -> WeylDiffSamples:
    """``M_N - tilde M_N`` at the contour nodes."""
    N = grid.N if N is None else N
    for d in (data, tilde_data):
        for s, m, v, _ in d.distinct():
            if s + 1 >= N:
                continue
            gap = grid.radius - abs(v)
            if abs(gap) < 1e-6:
                raise PoleOnContour(f"pole {v} lies on the contour |lam| = {grid.radius}")
            if gap < 0:
                raise HeadEscaped(f"head pole {v} lies outside the contour |lam| = {grid.radius}")
    vals = weyl_partial(data, N, grid.nodes) - weyl_partial(tilde_data, N, grid.nodes)
    return WeylDiffSamples(grid, vals)


def cluster_moments(source, center: complex, m: int, radius: float, M: int = 64) -> dict:
    """Zero count, zero centroid and the first ``m`` Laurent moments of the Weyl
    function on the circle ``|lam - center| = radius``."""
    return cluster_moments_many(source, [center], [m], [radius], M)[0]


def cluster_moments_many(source, centers, mults, radii, M: int = 64) -> list:
    """:func:`cluster_moments` for several circles with one batched evaluation."""
    src = as_source(source)
    grids = [circle(c, r, M) for c, r in zip(centers, radii)]
    if not grids:
        return []
    d0, d1, dd0, dd1 = src(np.concatenate([g.nodes for g in grids]), True)
    out = []
    for i, (g, c, m) in enumerate(zip(grids, centers, mults)):
        sl = slice(i * M, (i + 1) * M)
        count = int(round(winding_number(d1[sl])))
        z = g.nodes - c
        centroid = c + (z * dd1[sl] / d1[sl]) @ g.weights / (2j * math.pi) / max(count, 1)
        Mv = -d0[sl] / d1[sl]
        alpha = np.array([(z ** k * Mv) @ g.weights / (2j * math.pi) for k in range(m)])
        out.append({"count": count, "centroid": complex(centroid), "alpha": alpha})
    return out
