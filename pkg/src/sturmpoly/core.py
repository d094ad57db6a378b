"""Domain types, contour geometry and serialization.

All types are immutable after construction.  Complex arrays are stored as
``numpy.complex128`` and serialized to JSON as ``{"re": [...], "im": [...]}``
pairs; Python's shortest round-trip float repr keeps the write/read cycle
lossless.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InputError, InvalidContour, InvalidProblem

logger = logging.getLogger(__name__)

DEFAULT_NX = 512
DEFAULT_MQ = 256


def _carray(values) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def principal_sqrt(lam):
    """Square root with ``arg`` in ``(-pi/2, pi/2]``.

    ``numpy.sqrt`` sends ``-1 - 0j`` to ``-1j``; the signed zero is cleared
    first so that the negative real axis always maps to the positive
    imaginary axis.
    """
    lam = np.asarray(lam, dtype=np.complex128)
    lam = lam.real + 1j * (lam.imag + 0.0)
    return np.sqrt(lam)


# ---------------------------------------------------------------------------
# Potential and boundary polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PotentialSigma:
    """Samples of the antiderivative ``sigma`` of the potential on ``[0, pi]``.

    Values between nodes come from a not-a-knot cubic spline.
    """

    grid_points: np.ndarray
    values: np.ndarray
    interpolation_order: int = 3

    def __post_init__(self):
        x = np.array(self.grid_points, dtype=float)
        v = np.array(self.values, dtype=np.complex128)
        if x.ndim != 1 or x.shape != v.shape or x.size < 4:
            raise InvalidProblem("sigma grid and values must be 1-D arrays of equal length >= 4")
        if x[0] != 0.0 or abs(x[-1] - math.pi) > 1e-12:
            raise InvalidProblem("sigma grid must start at 0 and end at pi")
        h = np.diff(x)
        if np.any(h <= 0):
            raise InvalidProblem("sigma grid must be strictly increasing")
        if np.max(np.abs(h - h.mean())) > 1e-12 * h.mean() * x.size:
            raise InvalidProblem("sigma grid must be uniform")
        if not np.all(np.isfinite(v)):
            raise InvalidProblem("sigma values must be finite")
        if self.interpolation_order != 3:
            raise InvalidProblem("only cubic interpolation is supported")
        x[-1] = math.pi
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid_points", x)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func: Callable, n_x: int = DEFAULT_NX) -> "PotentialSigma":
        x = np.linspace(0.0, math.pi, n_x)
        return cls(x, np.asarray(func(x), dtype=np.complex128) * np.ones_like(x))

    @classmethod
    def zero(cls, n_x: int = DEFAULT_NX) -> "PotentialSigma":
        return cls.from_function(lambda x: np.zeros_like(x), n_x)

    @property
    def n_x(self) -> int:
        return self.grid_points.size

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.grid_points, self.values)

    def __call__(self, x):
        return self.spline(x)

    def resample(self, n_x: int) -> "PotentialSigma":
        return PotentialSigma.from_function(self.spline, n_x)

    def sup_distance(self, other: "PotentialSigma") -> float:
        if other.n_x == self.n_x:
            return float(np.max(np.abs(self.values - other.values)))
        return float(np.max(np.abs(self.values - other(self.grid_points))))

    def to_dict(self) -> dict:
        return {"n_x": self.n_x, "x_max": math.pi, "values": _cdump(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSigma":
        values = _cload(d["values"])
        return cls(np.linspace(0.0, math.pi, len(values)), values)


@dataclass(frozen=True, eq=False)
class BoundaryPolynomials:
    """``r1(lam) = sum c[n] lam**n`` (monic, degree p) and ``r2(lam) = sum d[n] lam**n``."""

    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=np.complex128).ravel()
        d = np.array(self.d, dtype=np.complex128).ravel()
        if c.size == 0:
            raise InvalidProblem("r1 needs at least one coefficient")
        if d.size > c.size:
            raise InvalidProblem("deg r2 must not exceed deg r1")
        d = np.concatenate([d, np.zeros(c.size - d.size, dtype=np.complex128)])
        if c[-1] != 1.0:
            raise InvalidProblem(f"r1 must be monic, got leading coefficient {c[-1]}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
            raise InvalidProblem("polynomial coefficients must be finite")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        if not self.is_coprime:
            # The zero model problem (r1 = lam**p, r2 = 0) is used as a reference
            # problem throughout, so a common root is reported but not rejected.
            logger.warning("r1 and r2 share a root: %s / %s", c, d)

    @property
    def p(self) -> int:
        return self.c.size - 1

    @property
    def is_coprime(self) -> bool:
        if self.p == 0:
            return True
        roots = np.roots(self.c[::-1])
        scale = max(1.0, float(np.max(np.abs(self.d))))
        return bool(np.min(np.abs(np.polyval(self.d[::-1], roots))) > 1e-8 * scale)

    def r1(self, lam):
        return np.polyval(self.c[::-1], lam)

    def r2(self, lam):
        return np.polyval(self.d[::-1], lam)

    def to_dict(self) -> dict:
        return {"p": self.p, "c": _cdump(self.c), "d": _cdump(self.d)}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundaryPolynomials":
        out = cls(_cload(d["c"]), _cload(d["d"]))
        if "p" in d and int(d["p"]) != out.p:
            raise InvalidProblem("degree p does not match the coefficient lists")
        return out


def eval_poly(polys: BoundaryPolynomials, which: str, lam):
    """Horner evaluation of ``r1`` or ``r2``."""
    coeffs = {"r1": polys.c, "r2": polys.d}[which]
    acc = np.zeros_like(np.asarray(lam, dtype=np.complex128))
    for a in coeffs[::-1]:
        acc = acc * lam + a
    return acc[()] if acc.ndim == 0 else acc


@dataclass(frozen=True, eq=False)
class Problem:
    sigma: PotentialSigma
    polys: BoundaryPolynomials

    @property
    def p(self) -> int:
        return self.polys.p

    @classmethod
    def build(cls, sigma: Callable | float = 0.0, c: Sequence = (1.0,), d: Sequence = (0.0,),
              n_x: int = DEFAULT_NX) -> "Problem":
        if callable(sigma):
            s = PotentialSigma.from_function(sigma, n_x)
        else:
            s = PotentialSigma.from_function(lambda x: np.full_like(x, sigma, dtype=complex), n_x)
        return cls(s, BoundaryPolynomials(c, d))

    def to_dict(self) -> dict:
        return {"type": "Problem", "sigma": self.sigma.to_dict(), "polys": self.polys.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        try:
            return cls(PotentialSigma.from_dict(d["sigma"]), BoundaryPolynomials.from_dict(d["polys"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidProblem(f"malformed problem document: {exc!r}") from exc


# ---------------------------------------------------------------------------
# Spectral data
# ---------------------------------------------------------------------------

def _order_key(lam: complex) -> tuple:
    rho = complex(principal_sqrt(lam))
    return (abs(rho), math.atan2(rho.imag, rho.real), lam.real, lam.imag)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigenvalues (repeated per multiplicity) and weight numbers.

    ``clusters`` holds ``(start, m)`` pairs with 0-based ``start``; the
    eigenvalue with index ``n`` sits at position ``n - 1``.
    ``N`` is the contour index chosen for the head, ``p`` the degree.
    """

    eigenvalues: np.ndarray
    weights: np.ndarray
    clusters: tuple
    p: int
    N: int

    def __post_init__(self):
        lam = _carray(self.eigenvalues)
        alpha = _carray(self.weights)
        if lam.shape != alpha.shape or lam.ndim != 1:
            raise InputError("eigenvalues and weights must have equal length")
        clusters = tuple((int(s), int(m)) for s, m in self.clusters)
        pos = 0
        for s, m in clusters:
            if s != pos or m < 1:
                raise InputError("clusters must partition the index range")
            pos += m
        if pos != lam.size:
            raise InputError("clusters must cover all eigenvalues")
        for s, m in clusters:
            if s + 1 >= self.N and m > 1:
                raise InputError("eigenvalues with index >= N must be simple")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "weights", alpha)
        object.__setattr__(self, "clusters", clusters)

    @classmethod
    def from_clusters(cls, values: Sequence[complex], mults: Sequence[int],
                      weights: Sequence[Sequence[complex]], p: int, N: int) -> "SpectralData":
        """Assemble sorted data from distinct eigenvalues and their weight blocks."""
        items = sorted(zip(values, mults, weights), key=lambda it: _order_key(complex(it[0])))
        lam, alpha, clusters = [], [], []
        for v, m, w in items:
            w = list(w)
            if len(w) != m:
                raise InputError("weight block length must equal the multiplicity")
            clusters.append((len(lam), m))
            lam.extend([complex(v)] * m)
            alpha.extend(complex(a) for a in w)
        return cls(np.array(lam), np.array(alpha), tuple(clusters), p, N)

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def rho(self) -> np.ndarray:
        return principal_sqrt(self.eigenvalues)

    @property
    def multiplicities(self) -> np.ndarray:
        out = np.zeros(len(self), dtype=int)
        for s, m in self.clusters:
            out[s:s + m] = m
        return out

    @property
    def kappa(self) -> np.ndarray:
        n = np.arange(1, len(self) + 1)
        return self.rho - (n - self.p - 1)

    def distinct(self):
        """Yield ``(start, m, lam, weights_block)`` per cluster."""
        for s, m in self.clusters:
            yield s, m, complex(self.eigenvalues[s]), self.weights[s:s + m]

    def head_clusters(self, N: int | None = None):
        N = self.N if N is None else N
        return [c for c in self.distinct() if c[0] + 1 < N]

    def truncated(self, n_max: int) -> "SpectralData":
        clusters = [(s, m) for s, m in self.clusters if s + m <= n_max]
        n = sum(m for _, m in clusters)
        return SpectralData(self.eigenvalues[:n], self.weights[:n], tuple(clusters), self.p, self.N)

    def replace(self, eigenvalues=None, weights=None, clusters=None, N=None) -> "SpectralData":
        return SpectralData(self.eigenvalues if eigenvalues is None else eigenvalues,
                            self.weights if weights is None else weights,
                            self.clusters if clusters is None else clusters,
                            self.p, self.N if N is None else N)

    def with_tail_from(self, other: "SpectralData", N: int | None = None) -> "SpectralData":
        """Keep entries with index < N, copy the rest from ``other`` (head-only perturbation)."""
        N = self.N if N is None else N
        k = N - 1
        if any(s < k < s + m for s, m in self.clusters):
            raise InputError("N splits a multiplicity cluster")
        lam = np.concatenate([self.eigenvalues[:k], other.eigenvalues[k:]])
        alpha = np.concatenate([self.weights[:k], other.weights[k:]])
        clusters = [(s, m) for s, m in self.clusters if s < k] + \
                   [(s, m) for s, m in other.clusters if s >= k]
        return SpectralData(lam, alpha, tuple(clusters), self.p, N)

    def to_dict(self) -> dict:
        mult = self.multiplicities
        rows = []
        for i in range(len(self)):
            rows.append({"n": i + 1,
                         "re_lambda": float(self.eigenvalues[i].real),
                         "im_lambda": float(self.eigenvalues[i].imag),
                         "re_alpha": float(self.weights[i].real),
                         "im_alpha": float(self.weights[i].imag),
                         "multiplicity": int(mult[i]),
                         "cluster_start": bool(any(s == i for s, _ in self.clusters))})
        return {"type": "SpectralData", "p": self.p, "N": self.N, "rows": rows}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralData":
        try:
            rows = d["rows"]
            lam = np.array([r["re_lambda"] + 1j * r["im_lambda"] for r in rows])
            alpha = np.array([r["re_alpha"] + 1j * r["im_alpha"] for r in rows])
            clusters = []
            for i, r in enumerate(rows):
                if r["cluster_start"]:
                    clusters.append((i, int(r["multiplicity"])))
            return cls(lam, alpha, tuple(clusters), int(d["p"]), int(d["N"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed spectral data document: {exc!r}") from exc


# ---------------------------------------------------------------------------
# Contours
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ContourGrid:
    """Circle ``|lam - center| = radius`` with trapezoidal weights for ``dmu``."""

    N: int
    p: int
    radius: float
    nodes: np.ndarray
    weights: np.ndarray
    center: complex = 0.0

    @property
    def M_q(self) -> int:
        return self.nodes.size


def circle(center: complex, radius: float, M: int) -> ContourGrid:
    theta = 2.0 * math.pi * np.arange(M) / M
    e = np.exp(1j * theta)
    nodes = center + radius * e
    weights = 1j * radius * e * (2.0 * math.pi / M)
    return ContourGrid(0, 0, float(radius), _carray(nodes), _carray(weights), complex(center))


def contour_radius(N: int, p: int) -> float:
    return (N - p - 1.5) ** 2


def make_contour(N: int, p: int, M_q: int = DEFAULT_MQ) -> ContourGrid:
    """The circle ``|lam| = (N - p - 3/2)**2`` with ``M_q`` uniform nodes."""
    if N < 1:
        raise InvalidContour("N must be >= 1")
    if M_q < 16 or M_q % 2:
        raise InvalidContour("M_q must be an even integer >= 16")
    if N - p - 1.5 <= 0:
        raise InvalidContour(f"N={N} too small for p={p}: need N >= p + 2")
    g = circle(0.0, contour_radius(N, p), M_q)
    return ContourGrid(N, p, g.radius, g.nodes, g.weights)


def contour_integral(values, grid: ContourGrid):
    """``(1/2 pi i) * sum_j w_j v_j`` along the last axis."""
    values = np.asarray(values)
    if values.shape[-1] != grid.M_q:
        raise InputError("values do not match the contour nodes")
    return values @ grid.weights / (2j * math.pi)


@dataclass(frozen=True, eq=False)
class WeylDiffSamples:
    contour: ContourGrid
    values: np.ndarray

    def __post_init__(self):
        v = _carray(self.values)
        if v.shape != (self.contour.M_q,) or not np.all(np.isfinite(v)):
            raise InputError("Weyl difference samples must be finite, one per node")
        object.__setattr__(self, "values", v)

    @property
    def delta1_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


# ---------------------------------------------------------------------------
# Cauchy data and results
# ---------------------------------------------------------------------------

def legendre_on_interval(j: int, t) -> np.ndarray:
    """Legendre polynomial ``P_j`` mapped from [-1, 1] onto [0, pi]."""
    return np.polynomial.legendre.legval(2.0 * np.asarray(t, dtype=float) / math.pi - 1.0,
                                         np.eye(j + 1)[j])


@dataclass(frozen=True, eq=False)
class CauchyData:
    """Generalized Cauchy data.

    ``G = sum_k g_coef[k-1] sin(k t) + sum_j g_poly[j] P_j(t)`` (k = 1..K_F,
    j = 0..L-1) and ``J = sum_k j_coef[k] cos(k t) + sum_j j_poly[j-1] P_j(t)``
    (k = 0..K_F, j = 1..L), with ``P_j`` the Legendre polynomials on [0, pi].
    The few polynomial terms carry the endpoint values that a pure sine or
    cosine series can only represent with slowly decaying coefficients.
    Samples of ``G`` and ``J`` on a uniform grid are exported for inspection.
    """

    g_coef: np.ndarray
    j_coef: np.ndarray
    C: np.ndarray
    D: np.ndarray
    g_poly: np.ndarray = ()
    j_poly: np.ndarray = ()
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        g = _carray(self.g_coef)
        j = _carray(self.j_coef)
        C = _carray(np.atleast_1d(self.C))
        D = _carray(np.atleast_1d(self.D) if len(np.atleast_1d(self.D)) else [])
        gp = _carray(np.atleast_1d(self.g_poly) if len(np.atleast_1d(self.g_poly)) else [])
        jp = _carray(np.atleast_1d(self.j_poly) if len(np.atleast_1d(self.j_poly)) else [])
        if j.size != g.size + 1:
            raise InputError("J needs K_F + 1 cosine coefficients when G has K_F sine coefficients")
        if C.size < 1 or D.size != C.size - 1:
            raise InputError("need p + 1 constants C and p constants D")
        for arr in (g, j, C, D, gp, jp):
            if not np.all(np.isfinite(arr)):
                raise InputError("Cauchy data must be finite")
        for name, arr in (("g_coef", g), ("j_coef", j), ("C", C), ("D", D),
                          ("g_poly", gp), ("j_poly", jp)):
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return self.C.size - 1

    @property
    def K_F(self) -> int:
        return self.g_coef.size

    def t_grid(self, n: int = 257) -> np.ndarray:
        return np.linspace(0.0, math.pi, n)

    def G(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.K_F + 1)
        out = np.sin(np.multiply.outer(t, k)) @ self.g_coef
        for j, a in enumerate(self.g_poly):
            out = out + a * legendre_on_interval(j, t)
        return out

    def J(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(0, self.K_F + 1)
        out = np.cos(np.multiply.outer(t, k)) @ self.j_coef
        for j, a in enumerate(self.j_poly, start=1):
            out = out + a * legendre_on_interval(j, t)
        return out

    def replace(self, **changes) -> "CauchyData":
        kw = {name: getattr(self, name) for name in
              ("g_coef", "j_coef", "C", "D", "g_poly", "j_poly")}
        kw.update(changes)
        return CauchyData(**kw)

    def to_dict(self) -> dict:
        t = self.t_grid()
        return {"type": "CauchyData", "p": self.p, "K_F": self.K_F,
                "g_coef": _cdump(self.g_coef), "j_coef": _cdump(self.j_coef),
                "g_poly": _cdump(self.g_poly), "j_poly": _cdump(self.j_poly),
                "C": _cdump(self.C), "D": _cdump(self.D),
                "t_grid": t.tolist(), "G": _cdump(self.G(t)), "J": _cdump(self.J(t)),
                "residuals": {k: float(v) for k, v in self.residuals.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "CauchyData":
        try:
            return cls(_cload(d["g_coef"]), _cload(d["j_coef"]), _cload(d["C"]), _cload(d["D"]),
                       _cload(d.get("g_poly", {"re": [], "im": []})),
                       _cload(d.get("j_poly", {"re": [], "im": []})),
                       dict(d.get("residuals", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed Cauchy data document: {exc!r}") from exc


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    problem: Problem
    diagnostics: dict

    def to_dict(self) -> dict:
        return {"type": "ReconstructionResult", "problem": self.problem.to_dict(),
                "diagnostics": _jsonable(self.diagnostics)}

    @classmethod
    def from_dict(cls, d: dict) -> "ReconstructionResult":
        return cls(Problem.from_dict(d["problem"]), d.get("diagnostics", {}))


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------

def _cdump(arr) -> dict:
    arr = np.asarray(arr, dtype=np.complex128)
    return {"re": [float(v) for v in arr.real], "im": [float(v) for v in arr.imag]}


def _cload(d) -> np.ndarray:
    if isinstance(d, dict):
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ValueError("re/im length mismatch")
        return re + 1j * im
    return np.asarray(d, dtype=np.complex128)


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return _cdump(obj)
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


_LOADERS = {"Problem": Problem, "SpectralData": SpectralData,
            "CauchyData": CauchyData, "ReconstructionResult": ReconstructionResult}


def dumps(obj) -> str:
    return json.dumps(obj.to_dict(), indent=1, allow_nan=False)


def loads(text: str, expected: type | None = None):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"not a valid JSON document: {exc}") from exc
    if not isinstance(d, dict) or d.get("type") not in _LOADERS:
        raise InputError("document lacks a known 'type' field")
    cls = _LOADERS[d["type"]]
    if expected is not None and cls is not expected:
        raise InputError(f"expected a {expected.__name__} document, got {d['type']}")
    return cls.from_dict(d)


def save(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load(path, expected: type | None = None):
    return loads(Path(path).read_text(), expected)
