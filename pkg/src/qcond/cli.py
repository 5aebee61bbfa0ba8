"""Command line scenario runner.

Usage::

    qcond run scenario.json [--method formula|oracle|both] [--out report.json]
    qcond sweep scenario.json --axis set-width|time|transform-count [--values 1,2,4] --out table.csv
    qcond check

Scenario files are JSON objects. Common fields:

``model``
    ``weyl_chain``, ``free_particle``, ``oscillator``, ``finite_dim`` or
    ``kg_pairings``.
``hbar``, ``mass``, ``omega``
    Physical parameters (defaults 1).
``split``
    Number of leading measurements forming the condition.
``method``
    ``formula``, ``oracle`` or ``both``.
``numerics``
    ``grid_points``, ``extent``, ``weighting``, ``rtol``, ``budget``.
``tolerance``
    Allowed relative discrepancy between the two paths (default 0.02).
``states``
    Optional density operators for the ``weyl_chain`` oracle, e.g.
    ``{"kind": "thermal", "beta": 0.5}``; the report lists the spread.
``transforms``
    ``{"kind": "galilei" | "symplectic" | "rescale", "count": 20, "seed": 0}``.
``sweep``
    ``{"axis": ..., "values": [...], "target": index}`` defaults for ``sweep``.

Model fields:

* ``weyl_chain``: ``events`` as ``[{"observable": "position", "set": [[0, 1]]}, ...]``;
  ``observable`` may also be a descriptor object such as
  ``{"kind": "rotated", "theta": 0.5}``.
* ``free_particle`` / ``oscillator``: ``times`` and ``sets``.
* ``finite_dim``: ``regions`` as ``[{"functionals": [[1, 0]], "sets": [[0, 1]]}, ...]``,
  optional ``form`` (defaults to the canonical form with ``hbar``).
* ``kg_pairings``: ``sets`` for three fields and either ``pairings``
  ``{"e12": .., "e13": .., "e23": ..}`` or ``field`` ``{"model": "massless", "times": [..]}``.

Sets are lists of ``[lo, hi]`` pairs, a single pair, or ``"R"``. Exit codes:
0 success, 2 bad configuration, 3 quadrature did not converge, 4 degenerate
input.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from contextlib import nullcontext
from importlib import resources
from pathlib import Path

import numpy as np

from . import prior_engine as pe
from . import propagators as pr
from . import weyl_oracle as wo
from .errors import ConfigParseError, QcondError
from .regions import GeneratedRegion, IntervalUnion
from .symplectic_core import SymplecticSpace, random_symplectic

MODELS = ("weyl_chain", "free_particle", "oscillator", "finite_dim", "kg_pairings")
METHODS = ("formula", "oracle", "both")
AXES = ("set-width", "time", "transform-count")
CSV_COLUMNS = (
    "axis", "value", "formula", "oracle", "discrepancy", "spread",
    "deviation", "max_deviation", "numerator", "denominator",
)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{x:.12g}"


# config parsing -----------------------------------------------------------


def _set(obj, where):
    try:
        return IntervalUnion.coerce(obj)
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"{where}: cannot read interval set {obj!r} ({exc})") from None


def _require(cfg, key, where="scenario"):
    if key not in cfg:
        raise ConfigParseError(f"{where}: missing field {key!r}")
    return cfg[key]


def load_config(path):
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return validate_config(cfg)


def validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigParseError("scenario must be a JSON object")
    model = _require(cfg, "model")
    if model not in MODELS:
        raise ConfigParseError(f"field 'model': expected one of {MODELS}, got {model!r}")
    cfg = dict(cfg)
    cfg.setdefault("method", "both")
    if cfg["method"] not in METHODS:
        raise ConfigParseError(f"field 'method': expected one of {METHODS}")
    for key in ("hbar", "mass", "omega"):
        v = cfg.setdefault(key, 1.0)
        if not isinstance(v, (int, float)) or not v > 0:
            raise ConfigParseError(f"field {key!r} must be a positive number")
    num = dict(cfg.get("numerics", {}))
    num.setdefault("grid_points", 1024)
    num.setdefault("extent", None)
    num.setdefault("weighting", "cell")
    num.setdefault("rtol", 1e-3)
    num.setdefault("budget", 1e8)
    n = num["grid_points"]
    if not isinstance(n, int) or n < 64 or n & (n - 1):
        raise ConfigParseError("numerics.grid_points must be a power of two >= 64")
    if num["weighting"] not in ("cell", "sharp"):
        raise ConfigParseError("numerics.weighting must be 'cell' or 'sharp'")
    for key in ("rtol", "budget"):
        if not isinstance(num[key], (int, float)) or not num[key] > 0:
            raise ConfigParseError(f"numerics.{key} must be a positive number")
    if num["extent"] is not None and not (isinstance(num["extent"], (int, float)) and num["extent"] > 0):
        raise ConfigParseError("numerics.extent must be a positive number")
    cfg["numerics"] = num
    cfg.setdefault("tolerance", 0.02)
    if model == "weyl_chain":
        events = _require(cfg, "events")
        if not isinstance(events, list) or len(events) < 2:
            raise ConfigParseError("field 'events': need a list of at least two events")
        for i, ev in enumerate(events):
            _require(ev, "observable", f"events[{i}]")
            _set(_require(ev, "set", f"events[{i}]"), f"events[{i}].set")
    elif model in ("free_particle", "oscillator"):
        times, sets = _require(cfg, "times"), _require(cfg, "sets")
        if len(times) != 3 or len(sets) != 3:
            raise ConfigParseError("fields 'times' and 'sets' need three entries each")
        for i, s in enumerate(sets):
            _set(s, f"sets[{i}]")
    elif model == "finite_dim":
        regions = _require(cfg, "regions")
        for i, r in enumerate(regions):
            fun, sets = _require(r, "functionals", f"regions[{i}]"), _require(r, "sets", f"regions[{i}]")
            if len(fun) != len(sets):
                raise ConfigParseError(f"regions[{i}]: functionals and sets differ in length")
    else:
        sets = _require(cfg, "sets")
        if len(sets) != 3:
            raise ConfigParseError("field 'sets': kg_pairings needs three sets")
        if "pairings" not in cfg and "field" not in cfg:
            raise ConfigParseError("kg_pairings needs 'pairings' or 'field'")
    n_ev = _n_events(cfg)
    split = cfg.setdefault("split", n_ev - 1)
    if not isinstance(split, int) or not 1 <= split < n_ev:
        raise ConfigParseError(f"field 'split' must be an integer in 1..{n_ev - 1}")
    if model in ("free_particle", "oscillator", "kg_pairings") and split != 2:
        raise ConfigParseError("three-measurement models condition on the first two (split 2)")
    return cfg


def _n_events(cfg):
    model = cfg["model"]
    if model == "weyl_chain":
        return len(cfg["events"])
    if model == "finite_dim":
        return len(cfg["regions"])
    return len(cfg["sets"])


# builders -----------------------------------------------------------------


def _params(cfg):
    omega = cfg["omega"] if cfg["model"] == "oscillator" else 0.0
    return pr.OscParams(cfg["mass"], omega, cfg["hbar"])


def _grid(cfg):
    num = cfg["numerics"]
    n = int(num["grid_points"])
    if num["extent"]:
        return wo.GridSpec(n, float(num["extent"]), cfg["hbar"])
    return wo.GridSpec.balanced(n, cfg["hbar"])


def _windows(cfg):
    return [pr.SpacetimeWindow(float(t), _set(s, "sets")) for t, s in zip(cfg["times"], cfg["sets"])]


def _space(cfg):
    n = len(cfg["regions"][0]["functionals"][0]) // 2
    if "form" in cfg:
        return SymplecticSpace(np.array(cfg["form"], dtype=float))
    return SymplecticSpace.canonical(n, cfg["hbar"])


def _regions(cfg, space=None):
    space = space or _space(cfg)
    return [
        GeneratedRegion.from_functionals(space, r["functionals"], [_set(s, "regions.sets") for s in r["sets"]])
        for r in cfg["regions"]
    ]


def _pairings(cfg):
    if "pairings" in cfg:
        p = cfg["pairings"]
        try:
            return pe.PairingMatrix(p["e12"], p["e13"], p["e23"])
        except KeyError as exc:
            raise ConfigParseError(f"field 'pairings' lacks {exc}") from None
    f = cfg["field"]
    model = f.get("model", "massless")
    kw = {"mass": cfg["mass"], "hbar": cfg["hbar"]}
    if model == "oscillator":
        kw["omega"] = cfg["omega"]
    return pe.PairingMatrix.from_model(model, f["times"], **kw)


def _box_chain(cfg):
    """Alternating position/momentum sets, padded with whole lines."""
    sets, split_at = [], None
    for i, ev in enumerate(cfg["events"]):
        if i == cfg["split"]:
            if len(sets) % 2:
                sets.append(IntervalUnion.full())
            split_at = len(sets) // 2
        kind = wo.parse_descriptor(ev["observable"])
        if isinstance(kind, wo.Position):
            want = 0
        elif isinstance(kind, wo.Momentum):
            want = 1
        else:
            return None
        if len(sets) % 2 != want:
            sets.append(IntervalUnion.full())
        sets.append(_set(ev["set"], f"events[{i}].set"))
    if len(sets) % 2:
        sets.append(IntervalUnion.full())
    return pe.ChainSpec(tuple(sets), split_at, cfg["hbar"])


def _oracle_chain(cfg):
    model = cfg["model"]
    if model == "weyl_chain":
        events = [(ev["observable"], ev["set"]) for ev in cfg["events"]]
    elif model == "free_particle":
        events = [(wo.FreeEvolved(w.time, cfg["mass"]), w.set) for w in _windows(cfg)]
    elif model == "oscillator":
        events = [
            (wo.Rotated(cfg["omega"] * w.time, cfg["mass"], cfg["omega"]), w.set) for w in _windows(cfg)
        ]
    else:
        raise ConfigParseError(f"no direct oracle chain for {model}")
    return wo.ProjectionChainSpec(tuple(events), cfg["split"])


def _kg_regions(e, sets):
    """Three strips in the canonical plane realizing the pairings ``e``."""
    space = SymplecticSpace.canonical(1)
    a1, a2 = pe.kg_project_f3(e)
    f = [np.array([1.0, 0.0]), np.array([0.0, e.e12])]
    f.append(a1 * f[0] + a2 * f[1])
    return [GeneratedRegion(space, v[None, :], [s]) for v, s in zip(f, sets)]


# path evaluation ----------------------------------------------------------


def _q_info(q):
    if isinstance(q, (pe.QValue, pr.QResult)):
        return {"value": q.value, "error": q.error, "evaluations": q.evaluations, "method": q.method}
    return {"value": float(q), "method": "closed-form"}


def formula_path(cfg):
    num = cfg["numerics"]
    rtol, budget = num["rtol"], num["budget"]
    model = cfg["model"]
    if model == "weyl_chain":
        chain = _box_chain(cfg)
        if chain is None:
            raise ConfigParseError("formula path needs position/momentum events only")
        res = pe.prior_probability_box(chain, rtol=rtol, budget=budget, full=True)
        out = {"probability": res["probability"], "numerator": _q_info(res["numerator"]),
               "denominator": _q_info(res["denominator"]), "rounds": chain.n}
        out["kernel_chain"] = res["numerator"].method == "kernel-chain"
        return out
    if model in ("free_particle", "oscillator"):
        ws, params = _windows(cfg), _params(cfg)
        q = pr.galilei_Q if model == "free_particle" else pr.osc_Q
        num_q = q(ws, params, rtol=rtol, budget=budget, full=True)
        den_q = q(ws[:2], params, rtol=rtol, budget=budget, full=True)
        return {"probability": num_q.value / den_q.value, "numerator": _q_info(num_q), "denominator": _q_info(den_q)}
    if model == "finite_dim":
        res = pe.finite_dim_prior(_regions(cfg), cfg["split"], rtol=rtol, budget=budget, full=True)
        if not isinstance(res, dict):
            return {"probability": res, "method": "oracle (unsupported chain length)"}
        return {"probability": res["probability"], "numerator": _q_info(res["numerator"]),
                "denominator": _q_info(res["denominator"])}
    e = _pairings(cfg)
    sets = [_set(s, "sets") for s in cfg["sets"]]
    res = pe.kg_prior_probability(e, *sets, rtol=rtol, budget=budget, full=True)
    return {"probability": res["probability"], "numerator": _q_info(res["numerator"]),
            "denominator": _q_info(res["denominator"]), "pairings": list(e.upper)}


def _state(spec, grid, cfg):
    kind = spec.get("kind", "ground")
    m = cfg["mass"]
    w = cfg["omega"]
    if kind == "ground":
        return wo.ground_state(grid, m, w)
    if kind == "thermal":
        return wo.thermal_state(grid, float(spec["beta"]), m, w)
    if kind == "coherent":
        return wo.coherent_state(grid, float(spec["x0"]), float(spec["p0"]), m, w)
    raise ConfigParseError(f"unknown state kind {kind!r}")


def oracle_path(cfg):
    num = cfg["numerics"]
    weighting = num["weighting"]
    model = cfg["model"]
    if model in ("finite_dim", "kg_pairings"):
        if model == "finite_dim":
            regions = _regions(cfg)
        else:
            regions = _kg_regions(_pairings(cfg), [_set(s, "sets") for s in cfg["sets"]])
        events, hbar = pe.oracle_events(regions)
        chain = wo.ProjectionChainSpec(tuple(events), cfg["split"])
        grid = wo.GridSpec(int(num["grid_points"]), float(num["extent"]), hbar) if num["extent"] else \
            wo.GridSpec.balanced(int(num["grid_points"]), hbar)
    else:
        chain = _oracle_chain(cfg)
        grid = _grid(cfg)
    p, nq, dq = wo.prior_conditional_probability_oracle(chain, grid, weighting, return_parts=True)
    out = {"probability": p, "numerator": {"value": nq}, "denominator": {"value": dq},
           "grid": {"n_points": grid.n_points, "extent": grid.extent, "hbar": grid.hbar}, "weighting": weighting}
    if cfg.get("states"):
        probs = [wo.conditional_probability(_state(s, grid, cfg), chain, grid, weighting) for s in cfg["states"]]
        out["state_probabilities"] = probs
        out["spread"] = max(probs) - min(probs)
    return out


def _discrepancy(a, b):
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def evaluate(cfg, method=None):
    method = method or cfg["method"]
    paths = {}
    if method in ("formula", "both"):
        paths["formula"] = formula_path(cfg)
    if method in ("oracle", "both"):
        paths["oracle"] = oracle_path(cfg)
    report = {"name": cfg.get("name", ""), "model": cfg["model"], "method": method, "paths": paths}
    if len(paths) == 2:
        d = _discrepancy(paths["formula"]["probability"], paths["oracle"]["probability"])
        report["discrepancy"] = d
        report["tolerance"] = cfg["tolerance"]
        report["within_tolerance"] = d <= cfg["tolerance"]
    return report


# transforms and sweeps ----------------------------------------------------


def _transformed(cfg, kind, rng):
    """Copy of ``cfg`` with one random covariance transformation applied."""
    out = json.loads(json.dumps(cfg))
    if kind == "galilei":
        if cfg["model"] != "free_particle":
            raise ConfigParseError("galilei transforms need the free_particle model")
        v, x0, t0 = rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(-2, 2)
        ws = pr.galilei_transform(_windows(cfg), v, x0, t0)
        out["times"] = [w.time for w in ws]
        out["sets"] = [w.set.to_json() for w in ws]
    elif kind == "symplectic":
        if cfg["model"] != "finite_dim":
            raise ConfigParseError("symplectic transforms need the finite_dim model")
        space = _space(cfg)
        M = random_symplectic(space, rng, 0.4)
        shift = rng.uniform(-1, 1, size=space.dim)
        out["regions"] = []
        for B in _regions(cfg, space):
            T = B.transformed(M, shift)
            fun = T.generators @ space.form
            out["regions"].append({"functionals": fun.tolist(), "sets": [s.to_json() for s in T.sets]})
    elif kind == "rescale":
        if cfg["model"] != "kg_pairings":
            raise ConfigParseError("rescale transforms need the kg_pairings model")
        c = rng.uniform(0.5, 2.0, size=3)
        e = _pairings(cfg).scaled(c)
        out.pop("field", None)
        out["pairings"] = {"e12": e.e12, "e13": e.e13, "e23": e.e23}
        out["sets"] = [_set(s, "sets").scale(ci).to_json() for s, ci in zip(cfg["sets"], c)]
    else:
        raise ConfigParseError(f"unknown transform kind {kind!r}")
    return out


def transform_rows(cfg, count=None):
    spec = cfg.get("transforms")
    if not spec:
        raise ConfigParseError("scenario has no 'transforms' field")
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    count = int(count if count is not None else spec.get("count", 20))
    base = evaluate(cfg, "formula")["paths"]["formula"]["probability"]
    rows, worst = [], 0.0
    for i in range(1, count + 1):
        p = evaluate(_transformed(cfg, spec["kind"], rng), "formula")["paths"]["formula"]["probability"]
        dev = _discrepancy(p, base)
        worst = max(worst, dev)
        rows.append({"axis": "transform-count", "value": i, "formula": p, "deviation": dev, "max_deviation": worst})
    return rows


def _with_value(cfg, axis, value, target):
    out = json.loads(json.dumps(cfg))
    if axis == "set-width":
        if cfg["model"] == "weyl_chain":
            holder, key = out["events"][target], "set"
        elif cfg["model"] == "finite_dim":
            holder, key = out["regions"][target]["sets"], 0
        else:
            holder, key = out["sets"], target
        lo, hi = _set(holder[key], "set").hull
        c = 0.5 * (lo + hi) if math.isfinite(lo + hi) else 0.0
        holder[key] = [c - value / 2, c + value / 2]
    elif axis == "time":
        if cfg["model"] in ("free_particle", "oscillator"):
            out["times"][target] = value
        elif cfg["model"] == "kg_pairings" and "field" in out:
            out["field"]["times"][target] = value
        else:
            raise ConfigParseError("the time axis needs windows or field times")
    return out


def sweep_rows(cfg, axis, values=None, target=None):
    if axis not in AXES:
        raise ConfigParseError(f"axis must be one of {AXES}")
    spec = cfg.get("sweep", {})
    if axis == "transform-count":
        count = max(values) if values else None
        return transform_rows(cfg, count)
    values = values or spec.get("values")
    if not values:
        raise ConfigParseError("no sweep values given")
    target = target if target is not None else spec.get("target", -1)
    rows = []
    for v in values:
        rep = evaluate(validate_config(_with_value(cfg, axis, v, target)))
        row = {"axis": axis, "value": v}
        for name in ("formula", "oracle"):
            if name in rep["paths"]:
                row[name] = rep["paths"][name]["probability"]
        first = rep["paths"].get("formula") or rep["paths"]["oracle"]
        row["numerator"] = first["numerator"]["value"] if "numerator" in first else None
        row["denominator"] = first["denominator"]["value"] if "denominator" in first else None
        row["discrepancy"] = rep.get("discrepancy")
        row["spread"] = rep["paths"].get("oracle", {}).get("spread")
        rows.append(row)
    return rows


def write_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])


# commands -----------------------------------------------------------------


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def cmd_run(args):
    cfg = load_config(args.file)
    t0 = time.perf_counter()
    report = evaluate(cfg, args.method)
    if cfg.get("transforms"):
        report["transform_sweep"] = transform_rows(cfg)
    if args.timing:
        report["wall_time"] = time.perf_counter() - t0
    text = _dump(report)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.file)
    values = [float(v) for v in args.values.split(",")] if args.values else None
    rows = sweep_rows(cfg, args.axis, values, args.target)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    write_csv(rows, sys.stdout)
    return 0


def bundled_scenarios():
    root = resources.files("qcond") / "scenarios"
    return sorted((p for p in root.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


def check_scenario(path):
    """Run one bundled scenario against its ``expect`` block; returns (ok, message)."""
    cfg = json.loads(path.read_text())
    expect = cfg.get("expect", {})
    try:
        cfg = validate_config(cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = evaluate(cfg)
            if cfg.get("transforms"):
                report["transform_sweep"] = transform_rows(cfg)
    except QcondError as exc:
        name = type(exc).__name__
        if expect.get("error") == name:
            return True, f"raised {name} as expected"
        return False, f"{name}: {exc}"
    if "error" in expect:
        return False, f"expected {expect['error']}, got a result"
    msgs, ok = [], True
    if "within_tolerance" in report:
        ok &= report["within_tolerance"]
        msgs.append(f"discrepancy {report['discrepancy']:.2e} (tol {report['tolerance']})")
    if "probability" in expect:
        path_name = "formula" if "formula" in report["paths"] else "oracle"
        p = report["paths"][path_name]["probability"]
        good = abs(p - expect["probability"]) <= expect.get("rtol", 1e-3) * abs(expect["probability"])
        ok &= good
        msgs.append(f"{path_name} {p:.6g} vs {expect['probability']:.6g}")
    if "max_deviation" in expect:
        worst = report["transform_sweep"][-1]["max_deviation"]
        ok &= worst <= expect["max_deviation"]
        msgs.append(f"max deviation {worst:.2e}")
    return bool(ok), "; ".join(msgs)


def cmd_check(args):
    failures = 0
    for path in bundled_scenarios():
        t0 = time.perf_counter()
        ok, msg = check_scenario(path)
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {path.name:<28s} {msg}  [{time.perf_counter() - t0:.1f}s]")
    return 1 if failures else 0


def build_parser():
    ap = argparse.ArgumentParser(prog="qcond", description="Prior conditional probabilities of sequential measurements")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="evaluate one scenario")
    p.add_argument("file")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--out")
    p.add_argument("--timing", action="store_true", help="include wall time in the report")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="sweep one scenario parameter, CSV output")
    p.add_argument("file")
    p.add_argument("--axis", required=True, choices=AXES)
    p.add_argument("--values", help="comma separated values (transform-count: the count)")
    p.add_argument("--target", type=int, help="index of the swept set or time (default: last)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("check", help="run the bundled acceptance scenarios")
    p.set_defaults(func=cmd_check)
    return ap


def _thread_limit():
    n = os.environ.get("QCOND_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            return args.func(args)
    except QcondError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, KeyError, TypeError, ValueError) as exc:
        print(f"error: ConfigParseError: {exc}", file=sys.stderr)
        return ConfigParseError.exit_code


if __name__ == "__main__":
    sys.exit(main())
