"""Perturbation sweeps: reconstruction error against the size of the data change.

Each family perturbs the model's own data by a parameter ``t``:

``shift-eigenvalue``
    every copy of eigenvalue ``k`` (1-based) moves by ``t``;
``scale-weight``
    weight ``alpha_k`` is multiplied by ``1 + t``;
``split-cluster``
    the double eigenvalue starting at ``k`` splits into ``lam +- sqrt(t)``,
    weights ``(alpha_k +- alpha_{k+1} / sqrt(t)) / 2`` keep the principal
    part of the Weyl function to first order;
``cauchy-constant``
    the Cauchy constant ``C_k`` (0-based) moves by ``t``.

Errors are measured against the model: ``sup |sigma - tilde sigma|`` and the
largest coefficient changes of ``r1`` and ``r2``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import Config
from .core import Problem, SpectralData
from .errors import InputError, SturmPolyError
from . import cauchy, inverse, spectrum

logger = logging.getLogger(__name__)

FAMILIES = ("shift-eigenvalue", "scale-weight", "split-cluster", "cauchy-constant")
COLUMNS = ("family", "k", "t", "delta", "delta1", "tail_l2", "sigma_err", "c_err", "d_err",
           "total_err", "verify_residual", "status", "error_kind")
NOISE_FLOOR = 1e-10


@dataclass(frozen=True)
class SweepSpec:
    family: str
    k: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown perturbation family {self.family!r}; choose from {FAMILIES}")

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """``"family:k"``, e.g. ``"shift-eigenvalue:1"``."""
        try:
            family, k = text.rsplit(":", 1)
            return cls(family, int(k))
        except ValueError as exc:
            raise InputError(f"perturbation spec must look like 'family:k', got {text!r}") from exc


def perturb_spectral(data: SpectralData, spec: SweepSpec, t: float) -> SpectralData:
    lam = data.eigenvalues.copy()
    alpha = data.weights.copy()
    clusters = list(data.clusters)
    i = spec.k - 1
    pos = [c for c in clusters if c[0] <= i < c[0] + c[1]]
    if not pos:
        raise InputError(f"index k={spec.k} outside the stored spectral data")
    s, m = pos[0]
    if spec.family == "shift-eigenvalue":
        lam[s:s + m] += t
    elif spec.family == "scale-weight":
        alpha[i] *= 1.0 + t
    elif spec.family == "split-cluster":
        if m != 2 or s != i:
            raise InputError(f"split-cluster needs a double eigenvalue starting at k={spec.k}")
        h = math.sqrt(t)
        a1, a2 = alpha[s], alpha[s + 1]
        lam[s], lam[s + 1] = lam[s] + h, lam[s] - h
        alpha[s], alpha[s + 1] = (a1 + a2 / h) / 2, (a1 - a2 / h) / 2
        j = clusters.index((s, m))
        clusters[j:j + 1] = [(s, 1), (s + 1, 1)]
    else:
        raise InputError(f"{spec.family} does not act on spectral data")
    blocks, values, mults = [], [], []
    for cs, cm in clusters:
        values.append(lam[cs])
        mults.append(cm)
        blocks.append(alpha[cs:cs + cm])
    return SpectralData.from_clusters(values, mults, blocks, data.p, data.N)


def _row(tilde: Problem, tilde_data: SpectralData, tilde_cd, spec: SweepSpec, t: float,
         cfg: Config, n_max: int) -> dict:
    row = {"family": spec.family, "k": spec.k, "t": t}
    try:
        if spec.family == "cauchy-constant":
            C = tilde_cd.C.copy()
            C[spec.k] += t
            res = cauchy.invert_from_cauchy(tilde, tilde_cd.replace(C=C), cfg, n_max=n_max,
                                            tilde_data=tilde_data)
            verify = res.diagnostics["cauchy_verify_error"]
        else:
            target = perturb_spectral(tilde_data, spec, t)
            res = inverse.invert(tilde, target, cfg, tilde_data=tilde_data)
            verify = max(res.diagnostics["verify_lambda_error"], res.diagnostics["verify_alpha_error"])
        d = res.diagnostics
        rec = res.problem
        row.update(delta=max(d["delta1"], d["tail_l2"]), delta1=d["delta1"], tail_l2=d["tail_l2"],
                   sigma_err=float(np.max(np.abs(rec.sigma.values - tilde.sigma.resample(cfg.N_x).values))),
                   c_err=float(np.max(np.abs(rec.polys.c - tilde.polys.c))),
                   d_err=float(np.max(np.abs(rec.polys.d - tilde.polys.d))),
                   verify_residual=verify, status="PASS", error_kind="")
        row["total_err"] = row["sigma_err"] + row["c_err"] + row["d_err"]
    except SturmPolyError as exc:
        logger.warning("sweep row t=%g failed: %s", t, exc)
        row.update(status="FAIL", error_kind=exc.kind)
    return row


def run_sweep(tilde: Problem, spec: SweepSpec, scales, config: Config | None = None,
              n_max: int | None = None) -> list:
    """One row per scale, in the given order.  Failed rows are kept with status FAIL."""
    cfg = config or Config()
    scales = [float(s) for s in scales]
    if not scales:
        raise InputError("at least one scale is required")
    if any(not s > 0 for s in scales):
        raise InputError("scales must be positive")
    if tilde.sigma.n_x != cfg.N_x:
        tilde = Problem(tilde.sigma.resample(cfg.N_x), tilde.polys)
    if n_max is None:
        n_max = 40 if spec.family == "cauchy-constant" else tilde.p + 8
    tilde_data = spectrum.spectral_data(tilde, n_max, cluster_tol=cfg.cluster_tol)
    tilde_cd = cauchy.cauchy_from_problem(tilde, cfg.K_F, tol=cfg.tol_ode) \
        if spec.family == "cauchy-constant" else None
    if spec.family == "cauchy-constant":
        if not 0 <= spec.k < tilde_cd.C.size:
            raise InputError(f"Cauchy constant index k={spec.k} outside 0..{tilde_cd.C.size - 1}")
    else:
        perturb_spectral(tilde_data, spec, scales[0])
    args = [(tilde, tilde_data, tilde_cd, spec, t, cfg, n_max) for t in scales]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_row, *zip(*args)))
    else:
        rows = [_row(*a) for a in args]
    return rows


def halving_ratios(rows: list, column: str) -> list:
    """``err(t_i) / err(t_{i+1})`` for consecutive passing rows above the noise floor."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if a["status"] != "PASS" or b["status"] != "PASS":
            continue
        if a[column] <= NOISE_FLOOR or b[column] <= NOISE_FLOOR:
            continue
        # normalized to an exact halving of t
        out.append(a[column] / b[column] * (b["t"] / a["t"]) * 2.0)
    return out


def is_linear(rows: list, column: str = "total_err", rel: float = 0.25) -> bool:
    """Per-halving ratios within ``[2 (1 - rel), 2 (1 + rel)]``.

    Single components may vanish to first order (``d_err`` under a weight
    scaling is quadratic); the combined error is the quantity bounded by
    ``delta``, so it is the default.
    """
    return all(2 * (1 - rel) <= r <= 2 * (1 + rel) for r in halving_ratios(rows, column))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10e}"
    return str(v)


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in COLUMNS])
    return buf.getvalue()


def plot_data_csv(rows: list) -> str:
    """log10(delta) against log10 of each error column, passing rows only."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "log10_delta", "log10_sigma_err", "log10_c_err", "log10_d_err"))
    for r in rows:
        if r["status"] != "PASS":
            continue
        logs = [math.log10(r[c]) if r[c] > 0 else float("-inf")
                for c in ("delta", "sigma_err", "c_err", "d_err")]
        w.writerow([_fmt(r["t"])] + [_fmt(v) for v in logs])
    return buf.getvalue()
