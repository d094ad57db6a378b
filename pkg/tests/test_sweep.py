import numpy as np
import pytest

from sturmpoly.config import Config
from sturmpoly.errors import InputError
from sturmpoly.sweep import (SweepSpec, halving_ratios, is_linear, perturb_spectral, plot_data_csv,
                             rows_to_csv, run_sweep)

from conftest import zero_p0


def test_spec_parsing():
    assert SweepSpec.parse("scale-weight:3") == SweepSpec("scale-weight", 3)
    for bad in ("nope:1", "shift-eigenvalue", "shift-eigenvalue:x"):
        with pytest.raises(InputError):
            SweepSpec.parse(bad)


def test_perturbations(data_zero_p0, data_zero_p1):
    sd = data_zero_p0
    moved = perturb_spectral(sd, SweepSpec("shift-eigenvalue", 2), 0.1)
    assert moved.eigenvalues[1] == pytest.approx(1.1)
    scaled = perturb_spectral(sd, SweepSpec("scale-weight", 1), 0.5)
    assert scaled.weights[0] == pytest.approx(1.5 * sd.weights[0])
    split = perturb_spectral(data_zero_p1, SweepSpec("split-cluster", 1), 1e-4)
    assert split.clusters[:2] == ((0, 1), (1, 1))
    assert sorted(split.eigenvalues[:2].real) == pytest.approx([-1e-2, 1e-2])
    # principal part kept: sum of weights = alpha_1, first moment = alpha_2
    a = data_zero_p1.weights
    assert split.weights[:2].sum() == pytest.approx(a[0])
    assert (split.weights[:2] * split.eigenvalues[:2]).sum() == pytest.approx(a[1], abs=1e-12)
    with pytest.raises(InputError):
        perturb_spectral(sd, SweepSpec("split-cluster", 1), 1e-4)
    with pytest.raises(InputError):
        perturb_spectral(sd, SweepSpec("shift-eigenvalue", 40), 1e-4)


def _rows(errs, ts, status=None):
    return [{"t": t, "sigma_err": e, "status": s}
            for t, e, s in zip(ts, errs, status or ["PASS"] * len(ts))]


def test_halving_ratios_and_linearity():
    rows = _rows([4e-3, 2e-3, 1e-3], [4, 2, 1])
    assert halving_ratios(rows, "sigma_err") == pytest.approx([2.0, 2.0])
    assert is_linear(rows, "sigma_err")
    assert not is_linear(_rows([4e-3, 1e-3, 2.5e-4], [4, 2, 1]), "sigma_err")
    # failed rows and noise-level entries are skipped
    assert halving_ratios(_rows([1e-3, 1e-12, 1e-3], [4, 2, 1]), "sigma_err") == []
    assert halving_ratios(_rows([4e-3, 2e-3], [4, 2], ["PASS", "FAIL"]), "sigma_err") == []


def test_usage_errors():
    with pytest.raises(InputError):
        run_sweep(zero_p0(), SweepSpec("shift-eigenvalue", 1), [])
    with pytest.raises(InputError):
        run_sweep(zero_p0(), SweepSpec("shift-eigenvalue", 1), [1e-3, -1e-3])


def test_small_sweep_is_linear_and_deterministic():
    spec = SweepSpec("shift-eigenvalue", 1)
    rows = run_sweep(zero_p0(), spec, [2e-3, 1e-3])
    assert all(r["status"] == "PASS" for r in rows)
    assert is_linear(rows, "sigma_err") and is_linear(rows, "d_err")
    again = run_sweep(zero_p0(), spec, [2e-3, 1e-3], Config(workers=2))
    assert rows_to_csv(again) == rows_to_csv(rows)
    text = plot_data_csv(rows)
    assert text.splitlines()[0].startswith("t,log10_delta") and len(text.splitlines()) == 3
