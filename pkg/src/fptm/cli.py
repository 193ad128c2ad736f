"""Command-line interface: every subcommand prints one JSON document.

Exit codes: 0 on success, 2 on numerical (domain) errors, 3 on bad
configuration.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .circle import GraphConfig, graph_transform, locate_eta_zero
from .dynamics import MapFamily, lyapunov, periodicity_probe
from .errors import CheckFailed, ConfigError, FptmError, PreconditionError, RealityViolation
from .fourier import TrigSeries
from .frequency import (GOLDEN, detect_resonances, diophantine_estimate, parse_frequency,
                        parse_frequency_vector, resonance_data)
from .kam import kam_solve, quadratic_slope, solution_defect
from .lindstedt import defect as lindstedt_defect
from .lindstedt import lindstedt_expand
from .models import generic_locking_family, locking_family, locking_guard
from .normalform import resonant_normal_form
from .scan import run_scan, write_outputs
from .sternberg import fiber_linearize, skew_product_from_circle

SCHEMA = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(payload):
    return json.dumps(_jsonable(payload), sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# map configuration


def parse_map_config(data):
    """MapConfig dict -> (MapFamily, numerics dict); raises ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError("map config must be a JSON object")
    if data.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"unsupported schema {data.get('schema')!r}")
    try:
        Omega = parse_frequency_vector(data["Omega"])
        dim = int(data.get("dim", Omega.size))
        if dim != Omega.size:
            raise ConfigError("dim does not match the length of Omega")
        kind = data.get("kind", "foliation")
        if kind not in ("foliation", "generic"):
            raise ConfigError(f"unknown kind {kind!r}")
        jets = [TrigSeries.from_dict(j) for j in data["f_jets"]]
        fam = MapFamily(kind, Omega, float(data.get("alpha", 1.0)), float(data.get("eps", 0.0)), jets)
    except ConfigError:
        raise
    except RealityViolation as exc:
        raise ConfigError(f"f_jets are not real: {exc}") from None
    except (KeyError, TypeError, ValueError, PreconditionError) as exc:
        raise ConfigError(f"invalid map config: {exc}") from None
    numerics = dict(data.get("numerics", {}))
    for key, val in numerics.items():
        if isinstance(val, (int, float)) and not isinstance(val, bool) and val <= 0:
            raise ConfigError(f"numerics.{key} must be positive")
    return fam, numerics


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _family(args):
    if getattr(args, "config", None):
        return parse_map_config(_load_json(args.config))
    omega = parse_frequency(args.omega)
    build = locking_family if args.model == "locking" else generic_locking_family
    return build(args.a, args.delta1, args.delta2, eps=args.eps, alpha=args.alpha, omega=omega), {}


def _resonance(F):
    res = resonance_data(F.alpha * F.Omega)
    if res is None:
        raise PreconditionError("alpha * Omega is not resonant; nothing to normalize")
    return res


def _circles(F, band, which=("positive_slope", "negative_slope")):
    G = F
    nf = resonant_normal_form(G, _resonance(G), N=1, band=band, eps_probe=0.0)
    out = {}
    for w in which:
        out[w] = graph_transform(nf, F.eps, which=w, config=GraphConfig(band=band))
    return nf, out


# ---------------------------------------------------------------------------
# end-to-end locking example


def _check(report, name, value, ok, bound=None):
    report["checks"][name] = {"value": value, "bound": bound, "pass": bool(ok)}
    if not ok:
        raise CheckFailed(f"check {name!r} failed: value {value!r}, bound {bound!r}")


def locking_example(a=0.3, delta1=0.1, delta2=0.5, eps=0.02, order=2, omega=GOLDEN,
                    sternberg=True):
    """Full pipeline on g = a + delta1 sin(2 pi x) + delta2 sin(2 pi y).

    Asserts the closed-form normal form, two circles of opposite stability
    with the multiplier bound, the Lindstedt order and the fiber
    linearization residual.  Raises CheckFailed naming the first failure.
    """
    if abs(a) >= abs(delta2):
        raise PreconditionError("need |a| < |delta2| for eta to have zeros")
    lam, guard = locking_guard(a, delta1, delta2, omega)
    if not guard:
        raise PreconditionError(f"need 2 omega |delta1| < lambda = {lam:.6g}")
    F = locking_family(a, delta1, delta2, eps=eps, alpha=1.0, omega=omega)
    res = _resonance(F)
    report = {"parameters": {"a": a, "delta1": delta1, "delta2": delta2, "eps": eps,
                             "omega": omega, "order": order},
              "lambda": lam, "checks": {}}
    nf = resonant_normal_form(F, res, N=1, band=16, eps_probe=0.0)
    _check(report, "n", nf.n, nf.n == 1, 1)
    eta_ref = TrigSeries.from_modes(1, {(0,): a, (1,): delta2 / 2j})
    eta_err = float(np.max(np.abs((nf.eta - eta_ref).coeffs)))
    beta_err = float(np.max(np.abs((nf.beta - eta_ref * omega).coeffs)))
    _check(report, "eta_coefficients", eta_err, eta_err <= 1e-10, 1e-10)
    _check(report, "beta_coefficients", beta_err, beta_err <= 1e-10, 1e-10)

    sols = {w: graph_transform(nf, eps, which=w, config=GraphConfig(band=16))
            for w in ("positive_slope", "negative_slope")}
    kinds = sorted(s.stability for s in sols.values())
    _check(report, "opposite_stability", kinds, kinds == ["attracting", "repelling"])
    rep = next(s for s in sols.values() if s.stability == "repelling")
    att = next(s for s in sols.values() if s.stability == "attracting")
    bound = 1 + lam * math.pi / 4 * eps
    m_rep, m_att = rep.multipliers(), att.multipliers()
    _check(report, "repelling_multiplier", float(m_rep.min()), m_rep.min() > bound, bound)
    _check(report, "attracting_multiplier", float(m_att.max()), m_att.max() < 1.0, 1.0)
    for name, s in (("repelling", rep), ("attracting", att)):
        dfct = s.original_defect()
        _check(report, f"{name}_defect", dfct, dfct <= 1e-9, 1e-9)
    report["circles"] = {s.stability: {"y_star": s.y_star, "iterations": s.iterations,
                                       "multiplier_range": [float(s.multipliers().min()),
                                                            float(s.multipliers().max())],
                                       "polyline": s.polyline(64)}
                         for s in (rep, att)}

    y0, _ = locate_eta_zero(nf.eta, which="positive_slope")
    series = lindstedt_expand(F, res, y0, N=order)
    d1, d2 = lindstedt_defect(F, series, eps), lindstedt_defect(F, series, eps / 2)
    target = 2.0 ** (order + 1)
    if max(d1, d2) <= 1e-13:
        # the truncated series is already invariant up to roundoff
        _check(report, "lindstedt_ratio", None, True, target)
    else:
        ratio = d1 / d2 if d2 > 0 else float("inf")
        _check(report, "lindstedt_ratio", ratio, abs(math.log2(ratio) - (order + 1)) <= 0.4, target)
    report["lindstedt"] = {"defects": [d1, d2], "u_rederived": series.u_rederived,
                           "l1_y_sup": float(series.l_jets[0][1].sup_grid(64))}

    if sternberg:
        conj = fiber_linearize(skew_product_from_circle(rep))
        _check(report, "sternberg_residual", conj.residual, conj.residual <= 1e-8, 1e-8)
        report["sternberg"] = {"rate": conj.rate, "rate_bound": conj.rate_bound,
                               "iterations": conj.iterations_used,
                               "rho2_coefficient": conj.rho2_coefficient}
    report["pass"] = True
    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_frequency(args):
    Omega = parse_frequency_vector(args.omega)
    out = {"Omega": Omega, "relations": [], "resonant": False}
    rels = detect_resonances(Omega, k_max=args.kmax)
    if rels:
        out = resonance_data(Omega, k_max=args.kmax).to_dict()
        out["resonant"] = True
    if args.tau:
        est = diophantine_estimate(Omega, args.tau, k_max=args.dioph_kmax)
        out["diophantine"] = {"tau": est.tau, "nu": est.nu, "k_max": est.k_max,
                              "k_argmin": list(est.k_argmin)}
    return out


def cmd_dynamics(args):
    F, _ = _family(args)
    if args.x0:
        x0 = parse_frequency_vector(args.x0)
    else:
        x0 = np.random.default_rng(args.seed).random(F.dim)
    diag = lyapunov(F, x0, horizon=args.horizon, backward=args.backward)
    out = {"map": F.to_dict(), "orbit": diag.to_dict(), "x0": x0, "seed": args.seed}
    if args.grid:
        out["min_return_distance"] = periodicity_probe(F, args.grid, n_max=args.probe_steps)
    return out


def cmd_normalform(args):
    F, num = _family(args)
    nf = resonant_normal_form(F, _resonance(F), N=args.order, band=num.get("band", args.band))
    return nf.summary()


def cmd_lindstedt(args):
    F, num = _family(args)
    res = _resonance(F)
    if args.y0 is not None:
        y0 = parse_frequency_vector(args.y0)
    else:
        nf = resonant_normal_form(F, res, N=1, band=num.get("band", args.band), eps_probe=0.0)
        y0, _ = locate_eta_zero(nf.eta, which=args.which)
    series = lindstedt_expand(F, res, y0, N=args.order, band=num.get("band", args.band))
    out = series.to_dict()
    if F.eps > 0:
        out["defects"] = {repr(e): lindstedt_defect(F, series, e) for e in (F.eps, F.eps / 2)}
    return out


def cmd_circle(args):
    F, num = _family(args)
    which = ("positive_slope", "negative_slope") if args.which == "both" else (args.which,)
    _, sols = _circles(F, num.get("band", args.band), which)
    out = {}
    for w, s in sols.items():
        item = s.to_dict()
        if s.stability == "attracting":
            rot = s.rotation(horizon=args.horizon)
            item["rotation"] = {"value": rot.value, "error": rot.error}
        out[w] = item
    return out


def cmd_sternberg(args):
    F, num = _family(args)
    _, sols = _circles(F, num.get("band", args.band), (args.which,))
    sol = sols[args.which]
    conj = fiber_linearize(skew_product_from_circle(sol, degree=args.degree), tol=args.tol)
    out = conj.to_dict()
    out["stability"] = sol.stability
    return out


def cmd_kam(args):
    F, num = _family(args)
    if F.kind != "foliation":
        raise PreconditionError("the KAM solver handles foliation-kind maps")
    f = F.scalar()
    alpha = F.alpha if args.rotation is None else parse_frequency(args.rotation)
    band = num.get("band", args.band)
    state = kam_solve(f, alpha, F.Omega, tol=args.tol, max_steps=args.max_steps, band=band)
    out = state.to_dict()
    res = [h["residual"] for h in state.history]
    out["quadratic_slope"] = quadratic_slope(res)[0]
    out["solution_defect"] = solution_defect(f, state, alpha, F.Omega)
    return out


def cmd_scan(args):
    cfg = _load_json(args.config) if args.config else {}
    result = run_scan(cfg, jobs=args.jobs)
    counts = {}
    for c in result.cells:
        counts[c["class"]] = counts.get(c["class"], 0) + 1
    out = {"config_hash": result.config_hash, "counts": counts, "tongues": result.tongues}
    if args.out:
        out["manifest"] = write_outputs(result, args.out)
    else:
        out["result"] = result.to_dict()
    return out


def cmd_example(args):
    return locking_example(args.a, args.delta1, args.delta2, args.eps, args.order,
                           parse_frequency(args.omega), sternberg=not args.no_sternberg)


def _map_args(p):
    p.add_argument("--config", help="MapConfig JSON file (overrides the built-in model)")
    p.add_argument("--model", choices=("locking", "generic"), default="locking")
    p.add_argument("--a", type=float, default=0.3)
    p.add_argument("--delta1", type=float, default=0.1)
    p.add_argument("--delta2", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.02)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--omega", default="golden")
    p.add_argument("--band", type=int, default=16)


def build_parser():
    ap = argparse.ArgumentParser(prog="fptm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--out-file", dest="out_file", help="write JSON here instead of stdout")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("frequency", help="resonances and Diophantine constants")
    p.add_argument("--omega", required=True, help="comma separated, e.g. golden,1")
    p.add_argument("--kmax", type=int, default=32)
    p.add_argument("--tau", type=float)
    p.add_argument("--dioph-kmax", dest="dioph_kmax", type=int)
    p.set_defaults(func=cmd_frequency)

    p = sub.add_parser("dynamics", help="Lyapunov exponents along an orbit")
    _map_args(p)
    p.add_argument("--x0")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0, help="random initial point when --x0 is absent")
    p.add_argument("--grid", type=int, help="also run the periodic-orbit probe on this grid")
    p.add_argument("--probe-steps", dest="probe_steps", type=int, default=1000)
    p.add_argument("--backward", action="store_true")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("normalform", help="resonant normal form at alpha * Omega")
    _map_args(p)
    p.add_argument("--order", type=int, default=1)
    p.set_defaults(func=cmd_normalform)

    p = sub.add_parser("lindstedt", help="Lindstedt series of an invariant surface")
    _map_args(p)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--y0")
    p.add_argument("--which", choices=("positive_slope", "negative_slope"), default="positive_slope")
    p.set_defaults(func=cmd_lindstedt)

    p = sub.add_parser("circle", help="invariant circles by graph transform")
    _map_args(p)
    p.add_argument("--which", choices=("positive_slope", "negative_slope", "both"), default="both")
    p.add_argument("--horizon", type=int, default=2 ** 14)
    p.set_defaults(func=cmd_circle)

    p = sub.add_parser("sternberg", help="fiber linearization around a circle")
    _map_args(p)
    p.add_argument("--which", choices=("positive_slope", "negative_slope"), default="positive_slope")
    p.add_argument("--degree", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-13)
    p.set_defaults(func=cmd_sternberg)

    p = sub.add_parser("kam", help="Newton solver for a conjugacy to a rotation")
    _map_args(p)
    p.add_argument("--rotation", help="target rotation alpha (defaults to the map's alpha)")
    p.add_argument("--tol", type=float, default=1e-11)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=8)
    p.set_defaults(func=cmd_kam, band=32)

    p = sub.add_parser("scan", help="classify an (alpha, eps) grid")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("example", help="end-to-end locking example with assertions")
    p.add_argument("--a", type=float, default=0.3)
    p.add_argument("--delta1", type=float, default=0.1)
    p.add_argument("--delta2", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.02)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--omega", default="golden")
    p.add_argument("--no-sternberg", dest="no_sternberg", action="store_true")
    p.set_defaults(func=cmd_example)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        payload = args.func(args)
        code = 0
    except ConfigError as exc:
        payload, code = {"error": "ConfigError", "message": str(exc)}, 3
    except FptmError as exc:
        payload, code = {"error": type(exc).__name__, "message": str(exc)}, 2
    payload = dict(payload)
    payload.setdefault("schema", SCHEMA)
    payload.setdefault("command", args.command)
    text = dumps(payload)
    if args.out_file:
        with open(args.out_file, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
