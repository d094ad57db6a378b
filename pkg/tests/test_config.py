import json

import pytest

from sturmpoly.config import Config
from sturmpoly.errors import InputError


def test_defaults():
    c = Config()
    assert (c.M_q, c.N_x, c.K_F, c.tol_ode, c.cond_floor) == (256, 512, 64, 1e-11, 1e-10)


def test_file_then_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"M_q": 128, "verify_tol": 1e-6}))
    c = Config.load(p).updated(M_q=None, N_x=256)
    assert (c.M_q, c.N_x, c.verify_tol) == (128, 256, 1e-6)
    assert Config.from_dict(c.to_dict()) == c


@pytest.mark.parametrize("bad", [{"M_q": 15}, {"N_x": 2}, {"tail_tol": 0}, {"bogus": 1},
                                 {"M_q": "many"}])
def test_invalid_configuration(bad):
    with pytest.raises(InputError):
        Config.from_dict(bad)


def test_malformed_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(InputError):
        Config.load(p)
