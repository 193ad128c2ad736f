"""Parameter scans over (alpha, eps): classify each cell as conjugate to a
rotation (KAM), locked on invariant circles, or undetermined."""

import csv
import hashlib
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .circle import GraphConfig, graph_transform, locate_eta_zero, refine_zero
from .errors import BudgetExceeded, ConfigError, FptmError
from .frequency import detect_resonances, parse_frequency, resonance_data
from .kam import kam_solve, solution_defect
from .models import generic_locking_family, locking_family
from .normalform import resonant_normal_form

CLASSES = ("conjugate", "locked_attracting", "locked_repelling", "locked_pair", "undetermined")

DEFAULT_CONFIG = {
    "schema": 1,
    "model": {"kind": "foliation", "a": 0.3, "delta1": 0.1, "delta2": 0.5, "omega": "golden",
              "drift": 0.2, "drift_y": 0.1},
    "alpha": {"min": 0.95, "max": 1.03, "n": 21},
    "eps": {"min": 0.005, "max": 0.055, "n": 11},
    "alpha0": 1.0,
    "numerics": {
        "kam_band": 20, "kam_tol": 1e-10, "kam_max_steps": 10, "lambda_tol": 1e-10,
        "secant_steps": 8, "birkhoff_steps": 1000, "birkhoff_seeds": 4,
        "circle_band": 12, "circle_tol": 1e-9, "nf_order": 1, "rotation_horizon": 4096,
        "divisor_floor": 1e-12,
    },
    "exhaustive": False,
    "budget": {"max_cells": 2000, "max_seconds": 600},
    "seed": 0,
}


def _merge(base, override):
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def normalize_config(cfg=None):
    """Fill defaults and validate; raises ConfigError."""
    cfg = _merge(DEFAULT_CONFIG, cfg or {})
    if cfg.get("schema") != 1:
        raise ConfigError("unsupported config schema")
    if cfg["model"]["kind"] not in ("foliation", "generic"):
        raise ConfigError("model.kind must be foliation or generic")
    for axis in ("alpha", "eps"):
        ax = cfg[axis]
        if int(ax["n"]) < 1 or float(ax["max"]) < float(ax["min"]):
            raise ConfigError(f"bad {axis} range")
    if float(cfg["eps"]["min"]) < 0:
        raise ConfigError("eps must be non-negative")
    for key, val in cfg["numerics"].items():
        if isinstance(val, (int, float)) and val <= 0:
            raise ConfigError(f"numerics.{key} must be positive")
    parse_frequency(cfg["model"]["omega"])
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def axis_values(ax):
    n = int(ax["n"])
    if n == 1:
        return [float(ax["min"])]
    return [float(v) for v in np.linspace(float(ax["min"]), float(ax["max"]), n)]


def family_for(cfg, alpha, eps):
    m = cfg["model"]
    omega = parse_frequency(m["omega"])
    if m["kind"] == "foliation":
        return locking_family(m["a"], m["delta1"], m["delta2"], eps=eps, alpha=alpha, omega=omega)
    return generic_locking_family(m["a"], m["delta1"], m["delta2"], eps=eps, alpha=alpha,
                                  omega=omega, drift=m["drift"], drift_y=m["drift_y"])


# ---------------------------------------------------------------------------
# per-cell pipelines


def _birkhoff_rotation(F, steps, seeds):
    """Average of the scalar s along orbits from a few fixed seeds."""
    s = F.scalar()
    X = (np.arange(seeds)[:, None] + 0.5) / seeds * np.ones(F.dim)[None, :]
    X[:, 1:] = X[:, 1:] * np.sqrt(2.0) % 1.0
    total = 0.0
    for _ in range(steps):
        v = s(X)[:, 0]
        total += v.mean()
        X = X + v[:, None] * F.Omega
    return total / steps


def kam_pipeline(F, num):
    """Secant on the target rotation until lambda vanishes."""
    if F.eps == 0:
        if detect_resonances(F.alpha * F.Omega):
            raise FptmError("resonant unperturbed rotation")
        return {"kam_residual": 0.0, "kam_lambda": 0.0, "rho_hat": F.alpha, "kam_steps": 0,
                "kam_defect": 0.0}
    s = F.scalar()
    rho = _birkhoff_rotation(F, num["birkhoff_steps"], num["birkhoff_seeds"])
    kw = dict(band=num["kam_band"], tol=num["kam_tol"], max_steps=num["kam_max_steps"],
              divisor_floor=num["divisor_floor"])

    def solve(a):
        st = kam_solve(s, a, F.Omega, **kw)
        if not st.converged:
            raise FptmError(f"KAM did not converge (residual {st.residual_norm:.3g})")
        return st

    a0 = rho
    st0 = solve(a0)
    a1 = a0 + st0.lam
    st = st0
    for _ in range(num["secant_steps"]):
        if abs(st.lam) <= num["lambda_tol"]:
            break
        st1 = solve(a1)
        if abs(st1.lam) <= num["lambda_tol"]:
            st, a0 = st1, a1
            break
        if st1.lam == st0.lam:
            raise FptmError("secant stalled")
        a0, a1, st0 = a1, a1 - st1.lam * (a1 - a0) / (st1.lam - st0.lam), st1
        st = st1
    if abs(st.lam) > num["lambda_tol"]:
        raise FptmError(f"lambda did not vanish ({st.lam:.3g})")
    alpha_rot = a0
    dfct = solution_defect(s, st, alpha_rot, F.Omega)
    if dfct > 100 * num["kam_tol"]:
        raise FptmError(f"off-grid KAM defect {dfct:.3g}")
    return {"kam_residual": st.residual_norm, "kam_lambda": st.lam, "rho_hat": alpha_rot,
            "kam_steps": st.steps, "kam_defect": dfct}


def circle_pipeline(F, alpha0, num, res=None):
    """Both slope branches of the resonance at alpha0; returns dict of found circles."""
    if F.eps == 0:
        raise FptmError("no circle pipeline at eps = 0")
    G = F.absorb_offset(alpha0)
    res = res or resonance_data(alpha0 * F.Omega)
    nf = resonant_normal_form(G, res, N=num["nf_order"], band=num["circle_band"], eps_probe=0.0)
    gcfg = GraphConfig(band=num["circle_band"], accelerate=True, max_iter=200)
    found, reasons = {}, []
    for which in ("positive_slope", "negative_slope"):
        try:
            y0, _ = locate_eta_zero(nf.eta, which=which)
            y = refine_zero(nf.eta_at(F.eps), y0)
            sol = graph_transform(nf, F.eps, y_star=y, config=gcfg)
            dfct = sol.original_defect()
            item = {"stability": sol.stability, "defect": dfct,
                    "multiplier": float(np.ravel(sol.splitting["multipliers"])[0])}
            if nf.kind == "foliation":
                m = sol.multipliers()
                item["gamma_min"], item["gamma_max"] = float(m.min()), float(m.max())
            if sol.stability == "attracting" and num["rotation_horizon"] > 0:
                rot = sol.rotation(horizon=int(num["rotation_horizon"]))
                item["rotation"] = rot.value
                item["frequency_drift"] = rot.value - float(nf.translation[0])
            found[which] = item
        except FptmError as exc:
            reasons.append(f"circle[{which}]:{type(exc).__name__}")
    return found, reasons


def classify_cell(F, cfg):
    """Classification and diagnostics of one (alpha, eps) cell; never raises domain errors."""
    num = cfg["numerics"]
    out = {"alpha": F.alpha, "eps": F.eps, "reasons": []}
    kam_ok = False
    if F.kind == "foliation":
        try:
            out.update(kam_pipeline(F, num))
            kam_ok = True
        except FptmError as exc:
            out["reasons"].append(f"kam:{type(exc).__name__}:{exc}"[:120])
    else:
        out["reasons"].append("kam:generic_kind")
    circles = {}
    if not kam_ok or cfg["exhaustive"]:
        try:
            circles, why = circle_pipeline(F, cfg["alpha0"], num)
            out["reasons"].extend(why)
        except FptmError as exc:
            out["reasons"].append(f"circle:{type(exc).__name__}")
    good = {k: v for k, v in circles.items() if v["defect"] <= num["circle_tol"]
            and abs(abs(v["multiplier"]) - 1.0) > 1e-6}
    out["circles"] = circles
    locked = bool(good)
    out["conflict"] = kam_ok and locked
    if out["conflict"]:
        label = "undetermined"
        out["reasons"].append("conflict:kam_and_circle")
    elif kam_ok:
        label = "conjugate"
    elif len(good) == 2:
        label = "locked_pair"
    elif good:
        label = "locked_" + next(iter(good.values()))["stability"]
        if label not in CLASSES:
            label = "undetermined"
    else:
        label = "undetermined"
    out["class"] = label
    return out


def _cell_job(args):
    cfg, alpha, eps = args
    return classify_cell(family_for(cfg, alpha, eps), cfg)


# ---------------------------------------------------------------------------


@dataclass
class ScanResult:
    config: dict
    config_hash: str
    alphas: list
    epss: list
    cells: list          # row-major: eps outer, alpha inner
    tongues: dict = field(default_factory=dict)

    def cell(self, i_eps, i_alpha):
        return self.cells[i_eps * len(self.alphas) + i_alpha]

    def grid_classes(self):
        return [[self.cell(i, j)["class"] for j in range(len(self.alphas))] for i in range(len(self.epss))]

    def to_dict(self):
        return {"schema": 1, "config": self.config, "config_hash": self.config_hash,
                "alphas": self.alphas, "epss": self.epss, "cells": self.cells,
                "tongues": self.tongues}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["i_eps", "i_alpha", "alpha", "eps", "class", "kam_residual", "kam_lambda",
                     "rho_hat", "defect_attracting", "defect_repelling", "multiplier_attracting",
                     "multiplier_repelling", "frequency_drift", "reasons"])
        for i, eps in enumerate(self.epss):
            for j, alpha in enumerate(self.alphas):
                c = self.cell(i, j)
                att = next((v for v in c["circles"].values() if v["stability"] == "attracting"), {})
                rep = next((v for v in c["circles"].values() if v["stability"] == "repelling"), {})
                wr.writerow([i, j, repr(alpha), repr(eps), c["class"],
                             repr(c.get("kam_residual", "")), repr(c.get("kam_lambda", "")),
                             repr(c.get("rho_hat", "")), repr(att.get("defect", "")),
                             repr(rep.get("defect", "")), repr(att.get("multiplier", "")),
                             repr(rep.get("multiplier", "")), repr(att.get("frequency_drift", "")),
                             ";".join(c["reasons"])])
        return buf.getvalue()


def tongue_polylines(alphas, epss, classes):
    """Left and right boundaries of the locked region, one point per eps row."""
    left, right = [], []
    for i, eps in enumerate(epss):
        locked = [j for j, c in enumerate(classes[i]) if c.startswith("locked")]
        if not locked:
            continue
        jl, jr = locked[0], locked[-1]
        al = alphas[jl] if jl == 0 else 0.5 * (alphas[jl] + alphas[jl - 1])
        ar = alphas[jr] if jr == len(alphas) - 1 else 0.5 * (alphas[jr] + alphas[jr + 1])
        left.append([al, eps])
        right.append([ar, eps])
    return {"left": left, "right": right}


def run_scan(config=None, jobs=1):
    cfg = normalize_config(config)
    alphas, epss = axis_values(cfg["alpha"]), axis_values(cfg["eps"])
    ncell = len(alphas) * len(epss)
    if ncell > int(cfg["budget"]["max_cells"]):
        raise BudgetExceeded(f"{ncell} cells exceed the budget of {cfg['budget']['max_cells']}")
    tasks = [(cfg, a, e) for e in epss for a in alphas]
    start = time.monotonic()
    limit = float(cfg["budget"]["max_seconds"])
    cells = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_cell_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))):
                cells.append(res)
                if time.monotonic() - start > limit:
                    pool.shutdown(cancel_futures=True)
                    raise BudgetExceeded(f"scan exceeded {limit} s")
    else:
        for t in tasks:
            cells.append(_cell_job(t))
            if time.monotonic() - start > limit:
                raise BudgetExceeded(f"scan exceeded {limit} s")
    result = ScanResult(config=cfg, config_hash=config_hash(cfg), alphas=alphas, epss=epss,
                        cells=cells)
    result.tongues = tongue_polylines(alphas, epss, result.grid_classes())
    return result


def write_outputs(result, out_dir):
    """grid.csv, result.json, tongues.json and a manifest with hashes."""
    import pathlib
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"result.json": result.to_json(), "grid.csv": result.to_csv(),
             "tongues.json": json.dumps(result.tongues, sort_keys=True, indent=1)}
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {"schema": 1, "version": __version__, "config_hash": result.config_hash,
                "files": {k: hashlib.sha256(v.encode()).hexdigest() for k, v in files.items()},
                "cells": len(result.cells)}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return manifest
