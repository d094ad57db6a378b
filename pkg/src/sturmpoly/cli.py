"""Command-line interface.

Subcommands::

    sturmpoly forward PROBLEM --n-max N -o DATA
    sturmpoly invert TILDE DATA -o PROBLEM [--diagnostics CSV]
    sturmpoly cauchy extract PROBLEM -o CAUCHY
    sturmpoly cauchy invert TILDE CAUCHY -o PROBLEM [--diagnostics CSV]
    sturmpoly sweep TILDE --perturb FAMILY:K --scales T1 T2 ... -o CSV [--plot-data CSV]

Exit codes: 0 ok, 2 input or usage error, 3 I/O error, 4 solver error,
5 verification failure.  Failures print one line ``error: <Kind>: <message>``
on stderr.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import cauchy, inverse, spectrum, sweep
from .config import Config
from .core import CauchyData, Problem, SpectralData, load, save
from .errors import SturmPolyError

logger = logging.getLogger("sturmpoly")

EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    return cfg.updated(tol_ode=args.tol_ode, M_q=args.M_q, N_x=args.N_x, K_F=args.K_F,
                       cond_floor=args.cond_floor, cluster_tol=args.cluster_tol,
                       verify_tol=args.verify_tol, tail_tol=args.tail_tol, workers=args.workers)


def _check_writable(*paths):
    for p in paths:
        if p is None:
            continue
        parent = Path(p).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK) or Path(p).is_dir():
            raise OSError(f"cannot write {p}")


def _write_diagnostics(path, diag: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("key", "value"))
        for k in sorted(diag):
            v = diag[k]
            if isinstance(v, (list, tuple, np.ndarray)):
                continue
            w.writerow((k, f"{v:.10e}" if isinstance(v, float) else v))


def _diag_path(args) -> str:
    return args.diagnostics or str(Path(args.out).with_suffix(".diagnostics.csv"))


def _summary(data: SpectralData):
    print(f"{'n':>4} {'m':>2} {'lambda_n':>40} {'alpha_n':>40}")
    mult = data.multiplicities
    for n, (lam, a) in enumerate(zip(data.eigenvalues, data.weights), start=1):
        print(f"{n:>4} {mult[n - 1]:>2} {lam.real:>19.12g}{lam.imag:+19.12g}j "
              f"{a.real:>19.12g}{a.imag:+19.12g}j")


def cmd_forward(args) -> int:
    cfg = _config(args)
    _check_writable(args.out)
    problem = load(args.problem, Problem)
    data = spectrum.spectral_data(problem, args.n_max, cluster_tol=cfg.cluster_tol)
    save(data, args.out)
    _summary(data)
    return 0


def cmd_invert(args) -> int:
    cfg = _config(args)
    _check_writable(args.out, _diag_path(args))
    tilde = load(args.tilde, Problem)
    data = load(args.data, SpectralData)
    res = inverse.invert(tilde, data, cfg, N=args.N)
    save(res.problem, args.out)
    _write_diagnostics(_diag_path(args), res.diagnostics)
    print(f"verification: {'PASS' if res.diagnostics['verify_passed'] else 'FAIL'}")
    return 0


def cmd_cauchy_extract(args) -> int:
    cfg = _config(args)
    _check_writable(args.out)
    problem = load(args.problem, Problem)
    cd = cauchy.cauchy_from_problem(problem, cfg.K_F, tol=cfg.tol_ode)
    save(cd, args.out)
    for k, v in sorted(cd.residuals.items()):
        print(f"fit residual {k}: {v:.3e}")
    return 0


def cmd_cauchy_invert(args) -> int:
    cfg = _config(args)
    _check_writable(args.out, _diag_path(args))
    tilde = load(args.tilde, Problem)
    cd = load(args.cauchy, CauchyData)
    res = cauchy.invert_from_cauchy(tilde, cd, cfg, n_max=args.n_max)
    save(res.problem, args.out)
    _write_diagnostics(_diag_path(args), res.diagnostics)
    print(f"verification: {'PASS' if res.diagnostics['verify_passed'] else 'FAIL'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if not args.scales:
        raise UsageError("at least one scale is required")
    _check_writable(args.out, args.plot_data)
    tilde = load(args.tilde, Problem)
    spec = sweep.SweepSpec.parse(args.perturb)
    rows = sweep.run_sweep(tilde, spec, args.scales, cfg, n_max=args.n_max)
    Path(args.out).write_text(sweep.rows_to_csv(rows))
    if args.plot_data:
        Path(args.plot_data).write_text(sweep.plot_data_csv(rows))
    failed = sum(r["status"] != "PASS" for r in rows)
    print(f"{len(rows)} rows, {failed} failed; halving ratios (total error): "
          + " ".join(f"{r:.3f}" for r in sweep.halving_ratios(rows, "total_err")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("configuration (flags override the config file)")
    g.add_argument("--config", help="JSON configuration file")
    g.add_argument("--tol-ode", dest="tol_ode", type=float)
    g.add_argument("--M-q", dest="M_q", type=int)
    g.add_argument("--N-x", dest="N_x", type=int)
    g.add_argument("--K-F", dest="K_F", type=int)
    g.add_argument("--cond-floor", dest="cond_floor", type=float)
    g.add_argument("--cluster-tol", dest="cluster_tol", type=float)
    g.add_argument("--verify-tol", dest="verify_tol", type=float)
    g.add_argument("--tail-tol", dest="tail_tol", type=float)
    g.add_argument("--workers", type=int)
    g.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="sturmpoly", description="Sturm-Liouville problems with polynomial "
                     "boundary conditions: spectra, reconstruction, Cauchy data, stability sweeps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("forward", parents=[common], help="eigenvalues and weights of a problem")
    p.add_argument("problem")
    p.add_argument("--n-max", dest="n_max", type=_positive_int, required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("invert", parents=[common], help="reconstruct a problem from spectral data")
    p.add_argument("tilde")
    p.add_argument("data")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--diagnostics", help="diagnostics CSV (default: next to --out)")
    p.add_argument("--N", type=_positive_int, help="head index (default: automatic)")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("cauchy", help="generalized Cauchy data")
    csub = p.add_subparsers(dest="cauchy_command", required=True, parser_class=_Parser)
    q = csub.add_parser("extract", parents=[common], help="fit Cauchy data of a problem")
    q.add_argument("problem")
    q.add_argument("-o", "--out", required=True)
    q.set_defaults(func=cmd_cauchy_extract)
    q = csub.add_parser("invert", parents=[common], help="reconstruct a problem from Cauchy data")
    q.add_argument("tilde")
    q.add_argument("cauchy")
    q.add_argument("-o", "--out", required=True)
    q.add_argument("--diagnostics")
    q.add_argument("--n-max", dest="n_max", type=_positive_int, default=40)
    q.set_defaults(func=cmd_cauchy_invert)

    p = sub.add_parser("sweep", parents=[common], help="perturbation sweep")
    p.add_argument("tilde")
    p.add_argument("--perturb", required=True, help=f"FAMILY:K, FAMILY one of {', '.join(sweep.FAMILIES)}")
    p.add_argument("--scales", type=float, nargs="*", required=True)
    p.add_argument("--n-max", dest="n_max", type=_positive_int)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--plot-data", dest="plot_data")
    p.set_defaults(func=cmd_sweep)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    print(f"error: {kind}: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        return _fail("UsageError", exc, 2)
    except SturmPolyError as exc:
        return _fail(exc.kind, exc, exc.exit_code)
    except OSError as exc:
        return _fail("IOError", exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
