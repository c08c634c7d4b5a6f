"""Command-line front end: ``burdengap {synth,sweep,train,audit}``.

Each command reads an optional JSON config (unknown keys are rejected),
applies flag overrides, writes CSV tables whose first line is
``# burdengap <version> config_sha256=<hash>``, then renders SVG plots from
those CSV files.  Exit codes: 0 success, 1 infeasible computation,
2 usage or validation error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

from . import __version__
from .datagen import (
    ADULT_COST_BASE,
    ADULT_GROUP0_MULTIPLIER,
    generate_adult_like,
    load_cdf_tables,
    load_csv_dataset,
    sample_from_cdf_tables,
    surrogate_cdf_tables,
    train_test_split,
)
from .domain import (
    PSI_SR,
    PSI_TPR,
    BurdenGapError,
    CostModel1D,
    FeatureSchema,
    InfeasibleManipulationError,
    LinearCostMultiD,
    ThresholdClassifier,
    cost_from_dict,
    classifier_from_dict,
    dumps_classifier,
)
from .experiments import (
    AUDIT_BOUND_COLUMNS,
    OPTIMUM_COLUMNS,
    TRAIN_CLASSIFIERS,
    audit,
    maybe_normalize,
    optimum_rows,
    outcome_metrics,
    run_synth,
    summarise,
    train_split,
)
from .metrics import METRICS_COLUMNS
from .response import ResponseSemantics
from .svg import Chart
from .train import SWEEP_COLUMNS, InfeasibleError, SolverOptions, sweep_thresholds

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid configuration or command-line input."""


def _tenths(lo: int, hi: int) -> list[float]:
    return [k / 10 for k in range(lo, hi + 1)]


DEFAULTS = {
    "synth": {
        "seed": 0, "psi": "sr",
        "mu0": 10.0, "mu1": 15.0, "sigma0_grid": [1.0, 2.0, 3.0, 4.0, 5.0],
        "n_per_group": 500, "repetitions": 50,
        "h_bound": 0.4, "g_bound": 4.0, "grid_points": 100,
    },
    "sweep": {
        "seed": 0, "psi": "both",
        "tables": None, "dataset": None, "counts": [116_000, 16_000], "test_size": 20_000,
        "grid": {"start": 1, "stop": 100, "step": 1}, "grid1": None,
        "costs": ["linear", "quadratic"], "cost_scale": [1.0, 1.0], "g": 0.0,
    },
    "train": {
        "seed": 0, "psi": "sr",
        "dataset": None, "n": 20_000, "group0_fraction": 0.2,
        "repetitions": 20, "test_fraction": 0.2,
        "epsilon": 0.0, "g": 0.0,
        "epsilon_grid": _tenths(-5, 5), "g_grid": _tenths(-5, 5), "tradeoff": True,
        "cost_base": dict(ADULT_COST_BASE),
        "multiplier0": ADULT_GROUP0_MULTIPLIER, "multiplier1": 1.0,
        "solver": {"max_iterations": 100, "ftol": 1e-3, "fd_eps": 1e-3, "feasibility_tol": 1e-3},
        "save_classifiers": True,
    },
    "audit": {
        "seed": 0, "psi": "both",
        "dataset": None, "classifier": None, "cost": None, "semantics": "boundary",
    },
}

PSI_CHOICES = {"sr": (PSI_SR,), "tpr": (PSI_TPR,), "both": (PSI_SR, PSI_TPR)}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _type_ok(default, value) -> bool:
    if default is None or value is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, (int, float)):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, (list, dict))  # grids may be ranges
    if isinstance(default, dict):
        return isinstance(value, (dict, list))
    return isinstance(value, type(default))


def load_config(command: str, path: str | None, overrides: dict) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise UsageError("config file must hold a JSON object")
        cfg = _merge(cfg, user, command)
    return _merge(cfg, {k: v for k, v in overrides.items() if v is not None}, command)


def _merge(cfg: dict, user: dict, command: str) -> dict:
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    for key, value in user.items():
        if not _type_ok(DEFAULTS[command][key], value):
            raise UsageError(f"config key {key!r} has the wrong type: {value!r}")
        cfg[key] = value
    if cfg["psi"] not in PSI_CHOICES:
        raise UsageError("psi must be one of sr, tpr, both")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise UsageError("seed must be a non-negative integer")
    return cfg


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_grid(spec, name: str = "grid") -> list[float]:
    """A list of values or an inclusive range ``{"start", "stop", "step"}``."""
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{name} range needs numeric start, stop and step") from exc
        if not step > 0:
            raise UsageError(f"{name} step must be positive")
        count = math.floor((stop - start) / step + 1e-9) + 1
        values = [start + k * step for k in range(max(count, 0))]
    elif isinstance(spec, list):
        try:
            values = [float(v) for v in spec]
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{name} must contain numbers") from exc
    else:
        raise UsageError(f"{name} must be a list or a range object")
    if not values:
        raise UsageError(f"{name} is empty")
    if not all(math.isfinite(v) for v in values):
        raise UsageError(f"{name} must contain finite numbers")
    return values


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise UsageError(msg)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    if hasattr(v, "item"):  # numpy scalar
        return _cell(v.item())
    return str(v)


class Output:
    def __init__(self, directory: str, cfg: dict):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = f"# burdengap {__version__} config_sha256={config_hash(cfg)}"
        self.written: list[Path] = []

    def csv(self, name: str, columns, rows) -> Path:
        path = self.dir / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.header + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_cell(row.get(c)) for c in columns])
        self.written.append(path)
        return path

    def text(self, name: str, content: str) -> Path:
        path = self.dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        self.written.append(path)
        return path


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _floats(rows, key):
    return [float(r[key]) if r[key] not in ("", None) else math.nan for r in rows]


def plot_scatter(csv_path, svg_path, x, y, title, subset=None, subset_label=""):
    rows = read_csv(csv_path)
    chart = Chart(title, x, y).scatter(_floats(rows, x), _floats(rows, y), label="all cells" if subset else "")
    if subset:
        sel = [r for r in rows if subset(r)]
        chart.scatter(_floats(sel, x), _floats(sel, y), label=subset_label, radius=3)
    chart.save(svg_path)


def plot_lines(csv_path, svg_path, x, series, title, ylabel):
    rows = read_csv(csv_path)
    chart = Chart(title, x, ylabel)
    for label, mean_col, err_col in series:
        chart.line(_floats(rows, x), _floats(rows, mean_col), label, _floats(rows, err_col))
    chart.save(svg_path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(cfg: dict, out: Output) -> int:
    sigmas = parse_grid(cfg["sigma0_grid"], "sigma0_grid")
    _require(all(s > 0 for s in sigmas), "sigma0 values must be positive")
    _require(cfg["n_per_group"] >= 2, "n_per_group must be at least 2")
    _require(cfg["repetitions"] >= 1, "repetitions must be at least 1")
    _require(cfg["grid_points"] >= 1, "grid is empty: grid_points must be at least 1")
    status = EXIT_OK
    for psi in PSI_CHOICES[cfg["psi"]]:
        rows = run_synth(cfg["seed"], psi, float(cfg["mu0"]), float(cfg["mu1"]), sigmas,
                         int(cfg["n_per_group"]), int(cfg["repetitions"]), float(cfg["h_bound"]),
                         float(cfg["g_bound"]), int(cfg["grid_points"]))
        columns = list(rows[0])
        path = out.csv(f"synth_{psi.value}.csv", columns, rows)
        plot_lines(path, out.dir / f"synth_{psi.value}.svg", "sigma0",
                   [(f"|H| <= {cfg['h_bound']:g}", "hcon_g_mean", "hcon_g_stderr"),
                    (f"|G| <= {cfg['g_bound']:g}", "gcon_g_mean", "gcon_g_stderr")],
                   f"social burden gap vs sigma0 ({psi.value})", "G")
        if any(r["hcon_n_ok"] == 0 or r["gcon_n_ok"] == 0 for r in rows):
            status = EXIT_INFEASIBLE
    return status


def _sweep_dataset(cfg: dict):
    if cfg["dataset"] is not None:
        _require(cfg["tables"] is None, "give either tables or dataset, not both")
        ds = load_csv_dataset(cfg["dataset"])
        _require(ds.dim == 1, "sweep needs a one-feature dataset")
    else:
        counts = cfg["counts"]
        _require(isinstance(counts, list) and len(counts) == 2 and all(isinstance(c, int) and c > 0 for c in counts),
                 "counts must be two positive integers")
        tables = surrogate_cdf_tables(tuple(counts)) if cfg["tables"] is None \
            else load_cdf_tables(cfg["tables"], tuple(counts))
        ds = sample_from_cdf_tables(tables, seed=(cfg["seed"], 0))
    test_size = int(cfg["test_size"])
    _require(0 <= test_size < len(ds), "test_size must be below the dataset size")
    if test_size == 0:
        return ds, None
    return train_test_split(ds, test_size / len(ds), seed=(cfg["seed"], 1))


def cmd_sweep(cfg: dict, out: Output) -> int:
    grid0 = parse_grid(cfg["grid"], "grid")
    grid1 = grid0 if cfg["grid1"] is None else parse_grid(cfg["grid1"], "grid1")
    costs = cfg["costs"]
    _require(isinstance(costs, list) and costs and set(costs) <= {"linear", "quadratic"},
             "costs must be a non-empty subset of [linear, quadratic]")
    scale = tuple(float(a) for a in cfg["cost_scale"])
    _require(len(scale) == 2 and all(a > 0 for a in scale), "cost_scale must be two positive numbers")
    psi_list = PSI_CHOICES[cfg["psi"]]
    train, test = _sweep_dataset(cfg)
    status = EXIT_OK
    for name in costs:
        cost = CostModel1D(name, scale)
        records = sweep_thresholds(train, grid0, grid1, (PSI_SR, PSI_TPR), cost, float(cfg["g"]))
        rows = [r.row() for r in records]
        full = out.csv(f"sweep_{name}.csv", SWEEP_COLUMNS, rows)
        for psi in psi_list:
            key = psi.value
            feas = out.csv(f"feasible_{name}_{key}.csv", SWEEP_COLUMNS,
                           [r for r in rows if r[f"feasible_{key}"]])
            plot_scatter(full, out.dir / f"{name}_{key}_h_vs_g.svg", f"h_{key}", f"g_{key}",
                         f"H vs G, {name} cost ({key})",
                         subset=lambda r: r["tau0"] == r["tau1"], subset_label="shared threshold")
            plot_scatter(feas, out.dir / f"{name}_{key}_accuracy_vs_g.svg", f"g_{key}", "accuracy",
                         f"feasible classifiers, {name} cost ({key})")
        opt = optimum_rows(records, name, cost, psi_list, float(cfg["g"]), test)
        out.csv(f"optimum_{name}.csv", OPTIMUM_COLUMNS, opt)
        if any(r["status"] != "ok" for r in opt):
            status = EXIT_INFEASIBLE
    return status


def _train_dataset(cfg: dict):
    if cfg["dataset"] is not None:
        ds = load_csv_dataset(cfg["dataset"])
    else:
        _require(cfg["n"] >= 10, "n must be at least 10")
        ds = generate_adult_like(int(cfg["n"]), seed=(cfg["seed"], 0),
                                 group0_fraction=float(cfg["group0_fraction"]))
    base = cfg["cost_base"]
    _require(isinstance(base, dict) and base, "cost_base must map feature names to costs")
    unknown = sorted(set(base) - set(ds.schema.names))
    _require(not unknown, f"cost_base names unknown feature(s): {', '.join(unknown)}")
    vec = [float(base.get(n, math.inf)) for n in ds.schema.names]
    cost = LinearCostMultiD.scaled(vec, float(cfg["multiplier0"]), float(cfg["multiplier1"]))
    ds = ds.with_schema(FeatureSchema(ds.schema.names, cost.manipulable))
    return ds, cost


def cmd_train(cfg: dict, out: Output) -> int:
    R = int(cfg["repetitions"])
    _require(R >= 1, "repetitions must be at least 1")
    _require(0 < float(cfg["test_fraction"]) < 1, "test_fraction must be in (0, 1)")
    eps_grid = parse_grid(cfg["epsilon_grid"], "epsilon_grid")
    g_grid = parse_grid(cfg["g_grid"], "g_grid")
    try:
        solver = SolverOptions(**cfg["solver"])
    except TypeError as exc:
        raise UsageError(f"solver: {exc}") from exc
    ds, cost = _train_dataset(cfg)
    main = [("uncons", 0.0), ("sr", float(cfg["epsilon"])), ("strat", float(cfg["g"]))]
    extra = ([("sr", e) for e in eps_grid] + [("strat", g) for g in g_grid]) if cfg["tradeoff"] else []
    status = EXIT_OK
    for psi in PSI_CHOICES[cfg["psi"]]:
        key = psi.value
        results = {}
        for k in range(R):
            outcomes = train_split(ds, cfg["seed"], k, float(cfg["test_fraction"]), cost, psi,
                                   main + extra, solver)
            for o in outcomes[:len(main)]:
                results.setdefault(("main", o.name), []).append(o)
                _log_split(o)
                if cfg["save_classifiers"]:
                    _save_classifier(out, cfg, key, o)
            for o in outcomes[len(main):]:
                results.setdefault(("grid", o.name, o.target), []).append(o)
        summary = []
        for name in TRAIN_CLASSIFIERS:
            outcomes = results[("main", name)]
            row = {"classifier": name, "psi": key, "target": outcomes[0].target}
            row.update(summarise("", outcome_metrics(outcomes)))
            summary.append(row)
            if row["n_ok"] == 0:
                status = EXIT_INFEASIBLE
        cols = list(summary[0])
        out.csv(f"summary_{key}.csv", cols, summary)
        if cfg["tradeoff"]:
            for name, label, grid in (("sr", "epsilon", eps_grid), ("strat", "g", g_grid)):
                rows = []
                for t in grid:
                    row = {label: t}
                    row.update(summarise("", outcome_metrics(results[("grid", name, t)])))
                    rows.append(row)
                path = out.csv(f"tradeoff_{name}_{key}.csv", list(rows[0]), rows)
                plot_lines(path, out.dir / f"tradeoff_{name}_{key}.svg", label,
                           [("accuracy", "accuracy_mean", "accuracy_stderr"),
                            ("G", "g_mean", "g_stderr"), ("H", "h_mean", "h_stderr")],
                           f"trade-off over {label} ({key})", "test value")
    return status


def _log_split(o) -> None:
    if not o.feasible:
        print(f"split {o.split}: {o.name} solver ended infeasible "
              f"(constraint value {o.train_constraint:.6g}); excluded from means", file=sys.stderr)
    elif o.test_metrics is None:
        print(f"split {o.split}: {o.name} has no usable manipulation direction; "
              "test burden undefined, excluded from means", file=sys.stderr)


def _save_classifier(out: Output, cfg: dict, key: str, o) -> None:
    meta = {
        "classifier": o.name, "psi": key, "target": o.target, "split": o.split,
        "seed": cfg["seed"], "config_sha256": config_hash(cfg),
        "feasible": o.feasible, "train_constraint": o.train_constraint,
        "test_metrics": o.test_metrics,
        "normalization": [list(s) for s in o.normalization],
    }
    out.text(f"classifiers/{key}_{o.name}_split{o.split:03d}.json", dumps_classifier(o.classifier, meta))


def _audit_cost(cfg: dict, classifier, dataset):
    spec = cfg["cost"]
    if spec is None:
        _require(isinstance(classifier, ThresholdClassifier),
                 "linear classifiers need a cost model (config key 'cost')")
        return CostModel1D.linear()
    if isinstance(spec, str):
        try:
            with open(spec, encoding="utf-8") as fh:
                spec = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read cost config {spec}: {exc}") from exc
    _require(isinstance(spec, dict), "cost must be an object or a path to a JSON file")
    return cost_from_dict(spec)


def cmd_audit(cfg: dict, out: Output) -> int:
    _require(cfg["dataset"] is not None, "audit needs a dataset (--dataset)")
    _require(cfg["classifier"] is not None, "audit needs a classifier (--classifier)")
    try:
        with open(cfg["classifier"], encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read classifier {cfg['classifier']}: {exc}") from exc
    classifier = classifier_from_dict(payload)
    ds = load_csv_dataset(cfg["dataset"])
    if ds.dim != classifier.dim:
        raise UsageError(f"dataset has {ds.dim} features, classifier expects {classifier.dim}")
    ds = maybe_normalize(ds, payload.get("metadata"))
    cost = _audit_cost(cfg, classifier, ds)
    if isinstance(cost, LinearCostMultiD):
        _require(cost.dim == ds.dim, f"cost has {cost.dim} entries, dataset has {ds.dim} features")
        ds = ds.with_schema(FeatureSchema(ds.schema.names, cost.manipulable, ds.schema.normalization))
    semantics = {"boundary": ResponseSemantics.BOUNDARY_COST,
                 "rational": ResponseSemantics.RATIONAL}.get(cfg["semantics"])
    _require(semantics is not None, "semantics must be boundary or rational")
    rows = []
    for report, bounds in audit(ds, classifier, cost, PSI_CHOICES[cfg["psi"]], semantics):
        row = report.row()
        row.update(bounds.row())
        rows.append(row)
    columns = list(METRICS_COLUMNS) + list(AUDIT_BOUND_COLUMNS)
    out.csv("audit.csv", columns, rows)
    for row in rows:
        print(f"[{row['psi']}] " + " ".join(f"{c}={_cell(row[c])}" for c in columns[1:]))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "sweep": cmd_sweep, "train": cmd_train, "audit": cmd_audit}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="burdengap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"burdengap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "synth": "synthetic 1-D experiment over a sigma0 grid",
        "sweep": "threshold sweep on score data sampled from CDF tables",
        "train": "constrained linear classifiers over repeated train/test splits",
        "audit": "metrics and bounds for a supplied dataset and classifier",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="master seed (unsigned integer)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--psi", choices=sorted(PSI_CHOICES), help="sub-population condition(s)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                       help="override one config key, e.g. --set repetitions=5")
        if name == "audit":
            p.add_argument("--dataset", help="CSV dataset (feature columns, y, z)")
            p.add_argument("--classifier", help="classifier JSON")
            p.add_argument("--cost", help="cost model JSON file")
    return parser


def _overrides(args) -> dict:
    over = {"seed": args.seed, "psi": args.psi}
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=JSON, got {item!r}")
        try:
            over[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            over[key.strip()] = raw
    for key in ("dataset", "classifier", "cost"):
        if getattr(args, key, None) is not None:
            over[key] = getattr(args, key)
    return over


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, _overrides(args))
        out = Output(args.out, cfg)
        return COMMANDS[args.command](cfg, out)
    except UsageError as exc:
        print(f"burdengap {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, InfeasibleManipulationError) as exc:
        print(f"burdengap {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (BurdenGapError, ValueError, OSError) as exc:
        print(f"burdengap {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
