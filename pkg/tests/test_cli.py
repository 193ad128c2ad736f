import json

import numpy as np
import pytest

from fptm.cli import dumps, locking_example, main, parse_map_config
from fptm.errors import ConfigError, PreconditionError
from fptm.fourier import TrigSeries
from fptm.frequency import GOLDEN


def run(capsys, *argv):
    code = main(list(argv))
    return code, json.loads(capsys.readouterr().out)


def fixture_config(**over):
    f = TrigSeries.from_modes(2, {(0, 0): 1.0, (1, 0): 0.05 / 2j, (0, 1): 0.05 / 2})
    cfg = {"schema": 1, "dim": 2, "Omega": ["golden", "sqrt(2)-1"], "alpha": 1.0, "eps": 1.0,
           "kind": "foliation", "f_jets": [f.to_dict()], "numerics": {"band": 24}}
    cfg.update(over)
    return cfg


def test_frequency_command(capsys):
    code, out = run(capsys, "frequency", "--omega", "golden,1", "--kmax", "8")
    assert code == 0 and out["command"] == "frequency" and out["schema"] == 1
    text = json.dumps(out)
    assert "[0, 1]" in text.replace("\n", "").replace(" ", "").replace(",", ", ")


def test_kam_command_with_config(capsys, tmp_path):
    path = tmp_path / "map.json"
    path.write_text(json.dumps(fixture_config()))
    code, out = run(capsys, "kam", "--config", str(path), "--tol", "1e-11")
    assert code == 0 and out["converged"]
    assert out["residual_norm"] <= 1e-11


def test_parse_map_config_errors():
    fam, num = parse_map_config(fixture_config())
    assert fam.dim == 2 and num == {"band": 24}
    assert np.allclose(fam.Omega, [GOLDEN, np.sqrt(2) - 1])
    with pytest.raises(ConfigError):
        parse_map_config(fixture_config(schema=2))
    with pytest.raises(ConfigError):
        parse_map_config(fixture_config(dim=3))
    with pytest.raises(ConfigError):
        parse_map_config(fixture_config(kind="twisted"))
    with pytest.raises(ConfigError):
        parse_map_config(fixture_config(numerics={"band": 0}))
    bad = {"dim": 2, "value_dim": 1, "band": 1, "coeffs": [{"k": [1, 0], "re": [1.0], "im": [0.0]}]}
    with pytest.raises(ConfigError):
        parse_map_config(fixture_config(f_jets=[bad]))
    with pytest.raises(ConfigError):
        parse_map_config({"Omega": ["golden"]})


def test_exit_codes(capsys, tmp_path):
    code, out = run(capsys, "kam", "--config", str(tmp_path / "missing.json"))
    assert code == 3 and out["error"] == "ConfigError"
    code, out = run(capsys, "frequency", "--omega", "pi-ish")
    assert code == 3
    code, out = run(capsys, "example", "--a", "0.6")
    assert code == 2 and out["error"] == "PreconditionError"
    code, out = run(capsys, "normalform", "--alpha", "0.7")
    assert code == 2


def test_example_report(capsys):
    code, out = run(capsys, "example", "--eps", "0.02")
    assert code == 0 and out["pass"]
    assert all(c["pass"] for c in out["checks"].values())
    assert out["checks"]["repelling_multiplier"]["value"] > 1 + 0.4 * np.pi / 4 * 0.02


def test_example_symmetric_case():
    rep = locking_example(0.0, 0.0, 0.5, 0.02, sternberg=False)
    ys = sorted(round(float(np.ravel(c["y_star"])[0]), 9) for c in rep["circles"].values())
    assert ys == [0.0, 0.5]
    assert rep["lindstedt"]["l1_y_sup"] <= 1e-14
    with pytest.raises(PreconditionError):
        locking_example(0.3, 0.4, 0.5)


def test_out_file_and_round_trip(capsys, tmp_path):
    target = tmp_path / "circle.json"
    code = main(["--out-file", str(target), "circle", "--which", "negative_slope", "--horizon", "256"])
    assert code == 0 and capsys.readouterr().out == ""
    text = target.read_text()
    data = json.loads(text)
    assert dumps(data) + "\n" == text
    assert sorted(p.name for p in tmp_path.iterdir()) == ["circle.json"]


def test_scan_command_writes_only_out_dir(capsys, tmp_path):
    cfg = tmp_path / "scan.json"
    cfg.write_text(json.dumps({"alpha": {"min": 1.0, "max": 1.0, "n": 1},
                               "eps": {"min": 0.02, "max": 0.02, "n": 1}}))
    code, out = run(capsys, "scan", "--config", str(cfg), "--out", str(tmp_path / "out"))
    assert code == 0 and out["counts"] == {"locked_pair": 1}
    names = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert names == ["grid.csv", "manifest.json", "result.json", "tongues.json"]


@pytest.mark.parametrize("cmd", [["dynamics", "--horizon", "200", "--grid", "3", "--probe-steps", "50"],
                                 ["normalform", "--order", "2"],
                                 ["lindstedt", "--order", "2"],
                                 ["sternberg"]])
def test_subcommands_smoke(capsys, cmd):
    code, out = run(capsys, *cmd)
    assert code == 0 and out["command"] == cmd[0]
