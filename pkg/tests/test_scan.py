import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fptm.errors import BudgetExceeded, ConfigError
from fptm.scan import (classify_cell, config_hash, family_for, normalize_config, run_scan,
                       tongue_polylines, write_outputs)


def small(**over):
    cfg = {"alpha": {"min": 0.99, "max": 1.01, "n": 3}, "eps": {"min": 0.02, "max": 0.04, "n": 2}}
    cfg.update(over)
    return cfg


def test_single_cell_matches_classify_cell():
    cfg = {"alpha": {"min": 1.0, "max": 1.0, "n": 1}, "eps": {"min": 0.02, "max": 0.02, "n": 1}}
    res = run_scan(cfg)
    norm = normalize_config(cfg)
    direct = classify_cell(family_for(norm, 1.0, 0.02), norm)
    assert res.cells[0]["class"] == direct["class"] == "locked_pair"


def test_reference_cells():
    cfg = normalize_config({})
    assert classify_cell(family_for(cfg, 0.95, 0.005), cfg)["class"] == "conjugate"
    # |a| > |delta2|: eta has no zero, so no circle is reported
    bad = normalize_config({"model": {"a": 0.6}})
    c = classify_cell(family_for(bad, 1.0, 0.02), bad)
    assert not c["class"].startswith("locked")
    assert "circle[positive_slope]:NoZero" in c["reasons"]


def test_budget_limits():
    with pytest.raises(BudgetExceeded):
        run_scan(small(budget={"max_cells": 2}))
    with pytest.raises(BudgetExceeded):
        run_scan(small(budget={"max_seconds": 1e-9}))


def test_config_validation_and_hash():
    with pytest.raises(ConfigError):
        normalize_config({"schema": 2})
    with pytest.raises(ConfigError):
        normalize_config({"model": {"kind": "other"}})
    with pytest.raises(ConfigError):
        normalize_config({"eps": {"min": -0.1}})
    with pytest.raises(ConfigError):
        normalize_config({"numerics": {"kam_tol": 0}})
    a, b = normalize_config({}), normalize_config({})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(normalize_config({"seed": 1}))


def test_frequency_drift_distinguishes_kinds():
    for kind, check in (("foliation", lambda d: abs(d) <= 1e-6), ("generic", lambda d: abs(d) >= 1e-3)):
        cfg = normalize_config({"model": {"kind": kind}, "exhaustive": True})
        c = classify_cell(family_for(cfg, 1.0, 0.02), cfg)
        att = c["circles"]["negative_slope"]
        assert att["stability"] == "attracting"
        assert check(att["frequency_drift"])


def test_outputs_and_manifest(tmp_path):
    import hashlib
    res = run_scan(small())
    man = write_outputs(res, tmp_path)
    for name, digest in man["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    back = json.loads((tmp_path / "result.json").read_text())
    assert back["config_hash"] == res.config_hash
    assert len((tmp_path / "grid.csv").read_text().strip().splitlines()) == 1 + 6


def test_parallel_scan_matches_serial():
    assert run_scan(small(), jobs=2).to_json() == run_scan(small()).to_json()


def test_tongue_polylines_synthetic():
    classes = [["conjugate", "locked_pair", "conjugate"], ["locked_pair"] * 3]
    t = tongue_polylines([0.0, 1.0, 2.0], [0.1, 0.2], classes)
    assert t["left"] == [[0.5, 0.1], [0.0, 0.2]]
    assert t["right"] == [[1.5, 0.1], [2.0, 0.2]]


def test_default_scan_structure(scan_pair):
    res, _, _ = scan_pair
    grid = res.grid_classes()
    widths = [sum(c.startswith("locked") for c in row) for row in grid]
    # the locked region widens with eps and contains alpha = 1 once it is resolved
    assert widths[-1] > widths[0]
    assert all(b >= a - 1 for a, b in zip(widths, widths[1:]))
    j1 = res.alphas.index(min(res.alphas, key=lambda a: abs(a - 1.0)))
    assert all(grid[i][j1].startswith("locked") for i in range(2, len(res.epss)))
    assert not any(c["conflict"] for c in res.cells)


@given(st.integers(1, 4), st.integers(1, 4))
def test_axis_shape(na, ne):
    cfg = normalize_config({"alpha": {"n": na}, "eps": {"n": ne}})
    from fptm.scan import axis_values
    a, e = axis_values(cfg["alpha"]), axis_values(cfg["eps"])
    assert len(a) == na and len(e) == ne
    assert a[0] == cfg["alpha"]["min"] and np.all(np.diff(a) > 0)
