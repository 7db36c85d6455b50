"""Command line driver: parameter sweeps, oracle comparisons and figure data.

Subcommands
-----------
simulate      sweep ``t = tau`` and write per-order CPF values to CSV
compare       same sweep plus an exact reference and a pass/fail summary
validate      run the invariant suite and print a JSON report
figure-data   write the CSV bundle for figure 1, 2 or 3

Configuration is a JSON file; ``--set a.b=value`` overrides single keys.
Exit codes: 0 ok, 2 bad configuration, 3 accuracy failure, 4 unsupported
model/oracle combination.
"""

from __future__ import annotations

import argparse
import copy
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .baths import ClassicalNoiseModel, ModelError, QuantumBathModel, default_propagator
from .engine import cpf_perturbative, joint_prob_perturbative
from .measurement import (ConditioningError, MeasurementScheme, MeasurementSet, cpf_from_joint, initial_state,
                          scheme_preset)
from .operators import ValidationError, validate_density_matrix

log = logging.getLogger("cpfseries")

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_UNSUPPORTED = 0, 2, 3, 4

DEFAULT_CONFIG = {
    "model": {"type": "dephasing", "gamma": 1.0, "tau_c": 0.05, "nbar": 0.0},
    "scheme": {"preset": "xxx"},
    "initial_state": {"p": 1.0},
    "grid": {"t_max": 4.0, "n_points": 21, "nodes": None, "y": [1, -1]},
    "series": {"max_order": 3},
    "oracle": {"kind": None, "n_traj": 100000, "seed": 0, "fock_cutoff": None, "tolerance": 0.01,
               "order": None},
    "output": "cpf.csv",
}

_NUM = {"type": "number"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {
    "anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}}}
_MSET = {"type": "object", "required": ["operators", "outcomes"], "additionalProperties": False,
         "properties": {"operators": {"type": "array", "items": _MATRIX, "minItems": 1},
                        "outcomes": {"type": "array", "items": _NUM, "minItems": 1}}}

SCHEMA = {
    "type": "object",
    "required": ["model", "scheme", "initial_state", "grid", "series", "oracle", "output"],
    "additionalProperties": False,
    "properties": {
        "model": {"type": "object", "additionalProperties": False, "required": ["type", "gamma", "tau_c"],
                  "properties": {"type": {"enum": ["dephasing", "bosonic"]},
                                 "gamma": {"type": "number", "exclusiveMinimum": 0},
                                 "tau_c": {"type": "number", "exclusiveMinimum": 0},
                                 "nbar": {"type": "number", "minimum": 0}}},
        "scheme": {"type": "object", "additionalProperties": False,
                   "properties": {"preset": {"type": ["string", "null"], "pattern": "^[xyz]{3}$"},
                                  "first": _MSET, "middle": _MSET, "last": _MSET}},
        "initial_state": {"type": "object", "additionalProperties": False,
                          "properties": {"p": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                                         "matrix": _MATRIX}},
        "grid": {"type": "object", "additionalProperties": False, "required": ["t_max", "n_points"],
                 "properties": {"t_max": {"type": "number", "exclusiveMinimum": 0},
                                "n_points": {"type": "integer", "minimum": 0},
                                "nodes": {"type": ["integer", "null"], "minimum": 3},
                                "y": {"type": "array", "items": _NUM, "minItems": 1}}},
        "series": {"type": "object", "additionalProperties": False, "required": ["max_order"],
                   "properties": {"max_order": {"type": "integer", "minimum": 1, "maximum": 3}}},
        "oracle": {"type": "object", "additionalProperties": False,
                   "properties": {"kind": {"enum": [None, "gaussian", "mc", "pseudomode"]},
                                  "n_traj": {"type": "integer", "minimum": 1000},
                                  "seed": {"type": "integer", "minimum": 0},
                                  "fock_cutoff": {"type": ["integer", "null"], "minimum": 1},
                                  "tolerance": {"type": "number", "exclusiveMinimum": 0},
                                  "order": {"type": ["integer", "null"], "minimum": 1, "maximum": 3}}},
        "output": {"type": "string", "minLength": 1},
    },
}


class ConfigError(ValueError):
    pass


class UnsupportedError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_override(cfg: dict, item: str) -> None:
    """Apply ``a.b.c=value``; the value is parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-object")
    node[parts[-1]] = value


def load_config(path: str | None = None, overrides=(), base: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG if base is None else base)
    if path:
        try:
            with open(path, encoding="utf-8") as f:
                cfg = _merge(cfg, json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    for item in overrides:
        apply_override(cfg, item)
    validate_config(cfg)
    return cfg


def _complex_matrix(rows) -> np.ndarray:
    return np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row] for row in rows])


def validate_config(cfg: dict) -> None:
    """Schema check plus the physical checks that need constructed objects."""
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(cfg), key=lambda e: [str(p) for p in e.path])
    if errors:
        lines = [f"  {'.'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n" + "\n".join(lines))
    try:
        build_scheme(cfg)
        build_state(cfg)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    kind = cfg["oracle"].get("kind")
    if kind is not None:
        _check_oracle(cfg["model"]["type"], kind)


def _check_oracle(model_type: str, kind: str) -> None:
    ok = {"dephasing": ("gaussian", "mc"), "bosonic": ("pseudomode",)}
    if kind not in ok[model_type]:
        raise UnsupportedError(f"oracle {kind!r} is not available for the {model_type} model")


def build_model(cfg: dict):
    m = cfg["model"]
    if m["type"] == "dephasing":
        return ClassicalNoiseModel(float(m["gamma"]), float(m["tau_c"]))
    return QuantumBathModel(float(m["gamma"]), float(m["tau_c"]), float(m.get("nbar", 0.0)))


def build_scheme(cfg: dict) -> MeasurementScheme:
    s = cfg["scheme"]
    if s.get("preset"):
        return scheme_preset(s["preset"])
    sets = []
    for key in ("first", "middle", "last"):
        if key not in s:
            raise ValidationError(f"scheme needs a preset or all of first/middle/last (missing {key})")
        sets.append(MeasurementSet(tuple(_complex_matrix(o) for o in s[key]["operators"]), s[key]["outcomes"]))
    return MeasurementScheme(*sets, name="custom")


def build_state(cfg: dict) -> np.ndarray:
    st = cfg["initial_state"]
    if st.get("matrix") is not None:
        return validate_density_matrix(_complex_matrix(st["matrix"]), name="initial state")
    if st.get("p") is None:
        raise ValidationError("initial_state needs p or matrix")
    return initial_state(float(st["p"]))


def time_unit(cfg: dict) -> float:
    """Rate that makes the time axis dimensionless."""
    m = cfg["model"]
    if m["type"] == "bosonic" and m.get("nbar", 0.0) > 0:
        return m["gamma"] * (m["nbar"] + 1.0)
    return m["gamma"]


def grid_points(cfg: dict) -> np.ndarray:
    g = cfg["grid"]
    return np.linspace(0.0, g["t_max"], g["n_points"]) if g["n_points"] else np.zeros(0)


# ---------------------------------------------------------------------------
# sweep


@lru_cache(maxsize=8)
def _propagator(model, s_max: float):
    return default_propagator(model, s_max=s_max)


def _oracle_joint(cfg, model, scheme, rho0, t, index):
    from .oracles import cpf_stderr, gaussian_dephasing_exact, mc_joint_prob, pseudomode_joint_prob

    o = cfg["oracle"]
    kind = o["kind"]
    if kind == "gaussian":
        res = gaussian_dephasing_exact(model, scheme, rho0, t, t)
    elif kind == "mc":
        seed = int(np.random.SeedSequence([o["seed"], index]).generate_state(1, np.uint64)[0])
        res = mc_joint_prob(model, scheme, rho0, t, t, n_traj=o["n_traj"], seed=seed)
    else:
        res = pseudomode_joint_prob(model, scheme, rho0, t, t, n_max=o.get("fock_cutoff"))
    return res, (lambda y: cpf_stderr(res, y)) if kind == "mc" else (lambda y: 0.0)


def compute_point(cfg: dict, index: int, x: float) -> list[dict]:
    """All rows for one sweep point ``x`` (dimensionless time)."""
    model, scheme, rho0 = build_model(cfg), build_scheme(cfg), build_state(cfg)
    t = x / time_unit(cfg)
    t_max = cfg["grid"]["t_max"] / time_unit(cfg)
    n_order = cfg["series"]["max_order"]
    nodes = cfg["grid"].get("nodes")
    nodes = None if nodes is None else (nodes, nodes)
    prop = _propagator(model, float(t_max + 1.0))
    joint, _ = joint_prob_perturbative(scheme, model, rho0, t, t, n_order, prop, nodes)
    oracle = _oracle_joint(cfg, model, scheme, rho0, t, index) if cfg["oracle"].get("kind") else None
    rows = []
    for y in cfg["grid"].get("y", [1, -1]):
        row = {"t": x, "tau": x, "y": float(y)}
        try:
            c = cpf_perturbative(scheme, model, rho0, t, t, y, n_order, prop, nodes)
            orders, total = list(c.orders), c.value
        except ConditioningError as e:
            log.warning("t=%g y=%g: %s", x, y, e)
            orders, total = [math.nan] * n_order, math.nan
        for n, v in enumerate(orders, 1):
            row[f"cpf_order{n}"] = v
        row["cpf_total"] = total
        if oracle is not None:
            res, se = oracle
            try:
                row["oracle_cpf"] = cpf_from_joint(res.joint, y).value
                row["oracle_stderr"] = se(y)
            except ConditioningError:
                row["oracle_cpf"] = row["oracle_stderr"] = math.nan
        else:
            row["oracle_cpf"] = row["oracle_stderr"] = math.nan
        row["ptable_checksum"] = joint.checksum()
        rows.append(row)
    return rows


def _point_task(args):
    return compute_point(*args)


def run_sweep(cfg: dict, workers: int = 1) -> list[dict]:
    tasks = [(cfg, i, float(x)) for i, x in enumerate(grid_points(cfg))]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_point_task, tasks))
    else:
        chunks = [_point_task(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def columns(max_order: int) -> list[str]:
    return (["t", "tau", "y"] + [f"cpf_order{n}" for n in range(1, max_order + 1)]
            + ["cpf_total", "oracle_cpf", "oracle_stderr", "ptable_checksum"])


def _fmt(v) -> str:
    return "%.15g" % v


def render_csv(cfg: dict, rows: list[dict]) -> str:
    cols = columns(cfg["series"]["max_order"])
    buf = io.StringIO()
    buf.write(f"# cpfseries {__version__}\n")
    buf.write(f"# time axis: {'gamma*(nbar+1)*t' if time_unit(cfg) != cfg['model']['gamma'] else 'gamma*t'}\n")
    buf.write("# config: " + json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n")
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[c]) for c in cols) + "\n")
    return buf.getvalue()


def write_csv(path: str | Path, cfg: dict, rows: list[dict]) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_csv(cfg, rows))
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: dict, workers: int = 1) -> int:
    rows = run_sweep(cfg, workers)
    out = write_csv(cfg["output"], cfg, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def compare_rows(cfg: dict, rows: list[dict]) -> dict:
    order = cfg["oracle"].get("order")
    key = "cpf_total" if order is None else f"cpf_order{order}"
    errs = [abs(r[key] - r["oracle_cpf"]) for r in rows if not (math.isnan(r[key]) or math.isnan(r["oracle_cpf"]))]
    tol = cfg["oracle"]["tolerance"]
    worst = max(errs) if errs else 0.0
    return {"series": key, "points": len(errs), "max_error": worst,
            "mean_error": float(np.mean(errs)) if errs else 0.0, "tolerance": tol, "passed": worst <= tol}


def cmd_compare(cfg: dict, workers: int = 1) -> int:
    if not cfg["oracle"].get("kind"):
        cfg = copy.deepcopy(cfg)
        cfg["oracle"]["kind"] = "gaussian" if cfg["model"]["type"] == "dephasing" else "pseudomode"
    rows = run_sweep(cfg, workers)
    write_csv(cfg["output"], cfg, rows)
    order = cfg["oracle"].get("order")
    key = "cpf_total" if order is None else f"cpf_order{order}"
    for r in rows:
        print(f"t={r['t']:.6g} y={r['y']:+g} series={r[key]:.10g} oracle={r['oracle_cpf']:.10g} "
              f"err={abs(r[key] - r['oracle_cpf']):.3e}")
    summary = compare_rows(cfg, rows)
    print(f"max_error={summary['max_error']:.3e} mean_error={summary['mean_error']:.3e} "
          f"tolerance={summary['tolerance']:g} {'PASS' if summary['passed'] else 'FAIL'}")
    return EXIT_OK if summary["passed"] else EXIT_ACCURACY


def validation_suite() -> dict:
    """Invariant checks with their measured values and pass flags."""
    from .oracles import mode_correlation_check
    from .operators import projector_P
    from .projection import appendix_identity_check, correlated_state, jaynes_cummings_generator
    from .pseudomode import PseudomodeModel

    report = {}
    sigma_e = np.diag([0.7, 0.2, 0.08, 0.02])
    r = appendix_identity_check(jaynes_cummings_generator(), sigma_e, correlated_state(), 2.0, 40, (2, 4))
    report["appendix_identities"] = {"irrelevant_ratio": r.irrelevant_ratio, "relevant_ratio": r.relevant_ratio,
                                     "passed": r.passed()}
    p = projector_P(sigma_e, 2).matrix
    idem = float(np.max(np.abs(p @ p - p)))
    report["projector_idempotence"] = {"max_deviation": idem, "passed": idem <= 1e-12}
    worst = 0.0
    for model, preset, rho0 in [(ClassicalNoiseModel(1.0, 0.1), "xxx", initial_state(1.0)),
                                (QuantumBathModel(1.0, 0.125), "xzx", initial_state(0.8)),
                                (QuantumBathModel(1.0, 0.5), "zzz", initial_state(0.8))]:
        for order in (1, 2, 3):
            j, _ = joint_prob_perturbative(scheme_preset(preset), model, rho0, 1.0, 1.5, order)
            worst = max(worst, abs(j.total() - 1.0))
    report["normalization"] = {"max_deviation": worst, "passed": worst <= 1e-12}
    dev = 0.0
    for nbar, n_max in [(0.0, 4), (0.2, 16)]:
        dev = max(dev, mode_correlation_check(PseudomodeModel(1.0, 0.125, nbar, n_max), np.linspace(0, 1, 11))["max_dev"])
    report["mode_correlations"] = {"max_deviation": dev, "passed": dev <= 1e-8}
    return report


def cmd_validate() -> int:
    report = validation_suite()
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if all(v["passed"] for v in report.values()) else EXIT_ACCURACY


def figure_configs(fig: int) -> dict[str, dict]:
    """Named configurations reproducing each figure's parameter sets."""
    out = {}
    if fig == 1:
        for tc in (0.05, 0.1):
            out[f"fig1_tauc{tc:g}"] = _merge(DEFAULT_CONFIG, {
                "model": {"type": "dephasing", "gamma": 1.0, "tau_c": tc},
                "scheme": {"preset": "xxx"}, "initial_state": {"p": 1.0},
                "grid": {"t_max": 3.0, "n_points": 31, "y": [1, -1]},
                "oracle": {"kind": "gaussian"}})
    elif fig == 2:
        for preset in ("zzz", "xzx"):
            for tc in (0.125, 0.5):
                out[f"fig2_{preset}_tauc{tc:g}"] = _merge(DEFAULT_CONFIG, {
                    "model": {"type": "bosonic", "gamma": 1.0, "tau_c": tc, "nbar": 0.0},
                    "scheme": {"preset": preset}, "initial_state": {"p": 0.8},
                    "grid": {"t_max": 4.0, "n_points": 21, "y": [-1]},
                    "oracle": {"kind": "pseudomode"}})
    elif fig == 3:
        for preset in ("zzz", "xzx"):
            for nbar in (0.05, 0.1, 0.2):
                out[f"fig3_{preset}_nbar{nbar:g}"] = _merge(DEFAULT_CONFIG, {
                    "model": {"type": "bosonic", "gamma": 1.0, "tau_c": 0.125, "nbar": nbar},
                    "scheme": {"preset": preset}, "initial_state": {"p": 0.8},
                    "grid": {"t_max": 4.0, "n_points": 21, "y": [1, -1]},
                    "oracle": {"kind": None}})
    else:
        raise ConfigError(f"unknown figure {fig}")
    return out


def _amplitude(rows, y):
    vals = [abs(r["cpf_total"]) for r in rows if r["y"] == y and not math.isnan(r["cpf_total"])]
    return max(vals) if vals else 0.0


def cmd_figure_data(fig: int, outdir: str, overrides=(), workers: int = 1) -> int:
    outdir = Path(outdir)
    results = {}
    for name, base in figure_configs(fig).items():
        cfg = load_config(None, overrides, base=base)
        cfg["output"] = str(outdir / f"{name}.csv")
        rows = run_sweep(cfg, workers)
        write_csv(cfg["output"], cfg, rows)
        print(f"wrote {cfg['output']}")
        results[name] = rows
    status = EXIT_OK
    if fig == 1:
        for name, rows in results.items():
            plus = {r["t"]: r["cpf_total"] for r in rows if r["y"] == 1}
            minus = {r["t"]: r["cpf_total"] for r in rows if r["y"] == -1}
            gap = max((abs(plus[k] - minus[k]) for k in plus if k in minus), default=0.0)
            ok = gap <= 1e-10
            print(f"{name}: y-independence max gap {gap:.2e} {'PASS' if ok else 'FAIL'}")
            status = status if ok else EXIT_ACCURACY
    if fig == 3:
        for preset in ("zzz", "xzx"):
            amps = [_amplitude(results[f"fig3_{preset}_nbar{n:g}"], 1) for n in (0.05, 0.1, 0.2)]
            ok = all(b > a for a, b in zip(amps, amps[1:]))
            print(f"{preset}: y=+1 amplitude vs nbar {['%.3e' % a for a in amps]} {'PASS' if ok else 'FAIL'}")
            status = status if ok else EXIT_ACCURACY
    return status


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cpfseries", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "compare"):
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--workers", type=int, default=1)
    sub.add_parser("validate")
    p = sub.add_parser("figure-data")
    p.add_argument("fig", type=int, choices=(1, 2, 3))
    p.add_argument("--outdir", default=".")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            return cmd_validate()
        if args.command == "figure-data":
            return cmd_figure_data(args.fig, args.outdir, args.set, args.workers)
        cfg = load_config(args.config, args.set)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.workers)
        return cmd_compare(cfg, args.workers)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnsupportedError, ModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ArithmeticError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
