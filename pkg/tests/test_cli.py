import csv
import json

import numpy as np
import pytest

from sturmpoly import Problem, load, save
from sturmpoly.cli import main
from sturmpoly.core import SpectralData

from conftest import PI, zero_p0


@pytest.fixture
def files(tmp_path):
    save(zero_p0(), tmp_path / "zero.json")
    return tmp_path


def _err_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: ")
    return err[0].split(":")[1].strip()


def test_forward_writes_closed_form_spectrum(files, capsys):
    assert main(["forward", str(files / "zero.json"), "--n-max", "5", "-o", str(files / "d.json")]) == 0
    sd = load(files / "d.json", SpectralData)
    assert np.allclose(sd.eigenvalues, (np.arange(1, 6) - 1) ** 2, atol=1e-8)
    assert np.allclose(sd.weights, [1 / PI] + [2 / PI] * 4, rtol=1e-6)
    assert "lambda_n" in capsys.readouterr().out


def test_malformed_problem_is_input_error(files, capsys):
    (files / "bad.json").write_text("{oops")
    assert main(["forward", str(files / "bad.json"), "--n-max", "3", "-o", str(files / "d.json")]) == 2
    assert _err_line(capsys) == "InputError"


def test_missing_file_is_io_error(files, capsys):
    assert main(["forward", str(files / "none.json"), "--n-max", "3", "-o", str(files / "d.json")]) == 3
    assert _err_line(capsys) == "IOError"


@pytest.mark.parametrize("argv", [
    ["forward", "X", "--n-max", "0", "-o", "Y"],
    ["sweep", "X", "--perturb", "shift-eigenvalue:1", "--scales", "-o", "Y"],
    ["invert"],
    [],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
    assert _err_line(capsys) == "UsageError"


def test_invert_identity_and_unwritable_output(files, capsys):
    main(["forward", str(files / "zero.json"), "--n-max", "6", "-o", str(files / "d.json")])
    rc = main(["invert", str(files / "zero.json"), str(files / "d.json"), "-o",
               str(files / "nodir" / "r.json")])
    assert rc == 3 and _err_line(capsys) == "IOError"
    rc = main(["invert", str(files / "zero.json"), str(files / "d.json"), "-o", str(files / "r.json")])
    assert rc == 0
    rec = load(files / "r.json", Problem)
    assert np.max(np.abs(rec.sigma.values)) < 1e-9
    with open(files / "r.diagnostics.csv") as fh:
        diag = dict(csv.reader(fh))
    assert diag["verify_passed"] == "True"


def test_config_file_and_solver_error(files, capsys):
    (files / "cfg.json").write_text(json.dumps({"cond_floor": 0.999}))
    save(Problem.build(lambda x: 0.1 * np.sin(x)), files / "truth.json")
    main(["forward", str(files / "truth.json"), "--n-max", "6", "-o", str(files / "d.json")])
    capsys.readouterr()
    rc = main(["invert", str(files / "zero.json"), str(files / "d.json"), "-o", str(files / "r.json"),
               "--config", str(files / "cfg.json")])
    assert rc == 4 and _err_line(capsys) == "IllConditioned"
    (files / "cfg.json").write_text(json.dumps({"bogus": 1}))
    rc = main(["invert", str(files / "zero.json"), str(files / "d.json"), "-o", str(files / "r.json"),
               "--config", str(files / "cfg.json")])
    assert rc == 2 and _err_line(capsys) == "InputError"


def test_verification_failure_exit_code(files, capsys, monkeypatch):
    from sturmpoly import inverse
    from sturmpoly.errors import VerificationFailure

    def boom(*a, **k):
        raise VerificationFailure("forward spectrum misses the target")

    monkeypatch.setattr(inverse, "verify_reconstruction", boom)
    main(["forward", str(files / "zero.json"), "--n-max", "4", "-o", str(files / "d.json")])
    capsys.readouterr()
    rc = main(["invert", str(files / "zero.json"), str(files / "d.json"), "-o", str(files / "r.json")])
    assert rc == 5 and _err_line(capsys) == "VerificationFailure"


def test_cauchy_extract_and_invert(files, capsys):
    assert main(["cauchy", "extract", str(files / "zero.json"), "-o", str(files / "c.json")]) == 0
    assert "fit residual" in capsys.readouterr().out
    assert main(["cauchy", "invert", str(files / "zero.json"), str(files / "c.json"), "--n-max", "10",
                 "-o", str(files / "r.json")]) == 0
    assert np.max(np.abs(load(files / "r.json", Problem).sigma.values)) < 1e-8


def test_sweep_outputs_are_deterministic(files):
    args = ["sweep", str(files / "zero.json"), "--perturb", "scale-weight:2", "--scales", "2e-3", "1e-3"]
    assert main(args + ["-o", str(files / "a.csv"), "--plot-data", str(files / "ap.csv")]) == 0
    assert main(args + ["-o", str(files / "b.csv"), "--workers", "2"]) == 0
    assert (files / "a.csv").read_bytes() == (files / "b.csv").read_bytes()
    rows = list(csv.DictReader(open(files / "a.csv")))
    assert [r["status"] for r in rows] == ["PASS", "PASS"]
    assert (files / "ap.csv").read_text().startswith("t,log10_delta")
