"""Experiment harness shared by the command line and the acceptance tests.

Every function here is a pure function of its arguments: randomness comes
from :func:`burdengap.datagen.rng_for` streams derived from a master seed.

Seed streams
    synth   dataset for sigma index ``i`` and repetition ``r``: ``(master, i, r)``
    sweep   sampled dataset ``(master, 0)``; train/test split ``(master, 1)``
    train   generated dataset ``(master, 0)``; split ``k``: ``(master, 1, k)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import (
    BoundsReport,
    burden_gap_bounds_1d,
    burden_gap_exact_linear,
    burden_gap_upper_quadratic,
    constraint_lhs_1d,
)
from .datagen import (
    apply_normalization,
    generate_synthetic_1d,
    normalize_fit_apply,
    train_test_split,
)
from .domain import (
    CostModel1D,
    Dataset,
    InfeasibleManipulationError,
    LinearClassifier,
    LinearCostMultiD,
    QuadraticCostMultiD,
    SchemaError,
    SubPopCondition,
    ThresholdClassifier,
)
from .metrics import MetricsReport, accuracy, metrics_report, selection_rate_gap, social_burden_gap
from .response import ResponseSemantics
from .train import (
    Constraint,
    InfeasibleError,
    SolverOptions,
    SweepRecord,
    TrainConfig,
    select_optimal,
    sweep_thresholds,
    train_linear,
)

NAN = float("nan")


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and standard error (ddof=1); a single value has stderr 0."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return NAN, NAN
    m = math.fsum(v.tolist()) / v.size
    if v.size == 1:
        return m, 0.0
    var = math.fsum(((v - m) ** 2).tolist()) / (v.size - 1)
    return m, math.sqrt(var / v.size)


def summarise(prefix: str, results: Sequence[dict | None]) -> dict:
    """Mean/stderr columns for accuracy, h and g over the non-missing results,
    plus the mean of ``|g|``."""
    ok = [r for r in results if r is not None]
    row = {f"{prefix}n_ok": len(ok), f"{prefix}n_infeasible": len(results) - len(ok)}
    for key in ("accuracy", "h", "g"):
        m, s = mean_stderr([r[key] for r in ok])
        row[f"{prefix}{key}_mean"] = m
        row[f"{prefix}{key}_stderr"] = s
    row[f"{prefix}g_abs_mean"] = mean_stderr([abs(r["g"]) for r in ok])[0]
    return row


# ---------------------------------------------------------------------------
# synthetic 1-D experiment
# ---------------------------------------------------------------------------

SYNTH_CLASSIFIERS = ("hcon", "gcon")


def synth_repetition(dataset: Dataset, psi: SubPopCondition, h_bound: float, g_bound: float,
                     grid_points: int) -> dict[str, dict | None]:
    """Best |H|-constrained and |G|-constrained thresholds on one dataset.

    The threshold grid is ``grid_points`` evenly spaced values spanning the
    dataset's feature range.
    """
    x = dataset.features[:, 0]
    grid = np.linspace(float(x.min()), float(x.max()), grid_points)
    records = sweep_thresholds(dataset, grid, grid, (psi,))
    out = {}
    for name, constraint in (("hcon", Constraint("abs_h_at_most", h_bound, psi)),
                             ("gcon", Constraint("abs_g_at_most", g_bound, psi))):
        try:
            r = select_optimal(records, constraint, tie_psi=psi)
        except InfeasibleError:
            out[name] = None
            continue
        out[name] = {"accuracy": r.accuracy, "h": r.h[psi], "g": r.g[psi], "tau0": r.tau0, "tau1": r.tau1}
    return out


def run_synth(seed: int, psi: SubPopCondition, mu0: float, mu1: float, sigma0_grid: Sequence[float],
              n_per_group: int, repetitions: int, h_bound: float, g_bound: float,
              grid_points: int) -> list[dict]:
    """One summary row per sigma0: mean and stderr over repetitions for the
    |H|-constrained (``hcon_``) and |G|-constrained (``gcon_``) classifiers."""
    rows = []
    for i, sigma0 in enumerate(sigma0_grid):
        per = {name: [] for name in SYNTH_CLASSIFIERS}
        for r in range(repetitions):
            ds = generate_synthetic_1d(mu0, mu1, sigma0, n_per_group, seed=(seed, i, r))
            for name, res in synth_repetition(ds, psi, h_bound, g_bound, grid_points).items():
                per[name].append(res)
        row = {"psi": psi.value, "sigma0": float(sigma0)}
        for name in SYNTH_CLASSIFIERS:
            row.update(summarise(f"{name}_", per[name]))
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# threshold sweep experiment
# ---------------------------------------------------------------------------

OPTIMUM_COLUMNS = ("cost", "selection", "psi", "status", "tau0", "tau1", "accuracy", "h", "g",
                   "constraint_lhs", "test_accuracy", "test_h", "test_g")


def optimum_rows(records: Sequence[SweepRecord], cost_name: str, cost: CostModel1D,
                 psi_list: Sequence[SubPopCondition], g_target: float,
                 test: Dataset | None) -> list[dict]:
    """Unconstrained optimum plus the burden-constrained optimum per psi.

    Test columns evaluate the selected thresholds on ``test`` (NaN without one).
    """
    rows = []
    plan = [("unconstrained", None)] + [("constrained", psi) for psi in psi_list]
    for selection, psi in plan:
        report_psi = psi or psi_list[0]
        row = {"cost": cost_name, "selection": selection, "psi": report_psi.value}
        try:
            if psi is None:
                rec = select_optimal(records, tie_psi=report_psi)
            else:
                rec = select_optimal(records, Constraint("lhs_at_most", g_target, psi), tie_psi=psi)
        except InfeasibleError as exc:
            row.update(status=f"infeasible: {exc}")
            rows.append({k: row.get(k, NAN) for k in OPTIMUM_COLUMNS})
            continue
        row.update(status="ok", tau0=rec.tau0, tau1=rec.tau1, accuracy=rec.accuracy,
                   h=rec.h[report_psi], g=rec.g[report_psi], constraint_lhs=rec.constraint_lhs[report_psi])
        if test is not None:
            clf = ThresholdClassifier(rec.tau0, rec.tau1)
            row.update(test_accuracy=accuracy(test, clf),
                       test_h=selection_rate_gap(test, clf, report_psi),
                       test_g=social_burden_gap(test, clf, cost, report_psi))
        rows.append({k: row.get(k, NAN) for k in OPTIMUM_COLUMNS})
    return rows


# ---------------------------------------------------------------------------
# linear-classifier training experiment
# ---------------------------------------------------------------------------

TRAIN_CLASSIFIERS = ("uncons", "sr", "strat")


@dataclass(frozen=True)
class SplitOutcome:
    name: str
    split: int
    target: float
    classifier: LinearClassifier
    feasible: bool
    train_constraint: float | None
    # None when the test burden is undefined (no usable manipulation direction)
    test_metrics: dict | None
    normalization: tuple


def _train_config(name: str, target: float, psi: SubPopCondition, solver: SolverOptions) -> TrainConfig:
    kind = {"uncons": "none", "sr": "stat_rate_at_least", "strat": "burden_gap_at_most"}[name]
    return TrainConfig(kind, target, psi, solver)


def train_split(dataset: Dataset, seed: int, split: int, test_fraction: float, cost: LinearCostMultiD,
                psi: SubPopCondition, plan: Sequence[tuple[str, float]],
                solver: SolverOptions) -> list[SplitOutcome]:
    """Train every ``(name, target)`` in ``plan`` on split ``split``.

    Features are normalised with training-partition statistics; metrics are
    measured on the normalised test partition.
    """
    train, test = train_test_split(dataset, test_fraction, seed=(seed, 1, split))
    train, test, stats = normalize_fit_apply(train, test)
    out = []
    for name, target in plan:
        res = train_linear(train, _train_config(name, target, psi, solver), cost)
        clf = res.classifier
        try:
            test_metrics = {"accuracy": accuracy(test, clf),
                            "h": selection_rate_gap(test, clf, psi),
                            "g": social_burden_gap(test, clf, cost, psi)}
        except InfeasibleManipulationError:
            test_metrics = None
        out.append(SplitOutcome(name, split, target, clf, res.feasible, res.constraint_value,
                                test_metrics, tuple(stats)))
    return out


def outcome_metrics(outcomes: Sequence[SplitOutcome]) -> list[dict | None]:
    """Test metrics of usable outcomes; None marks an excluded split."""
    return [o.test_metrics if o.feasible else None for o in outcomes]


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

AUDIT_BOUND_COLUMNS = ("lower", "upper", "exact", "delta", "w0_star", "w1_star", "constraint_lhs", "degenerate")


def audit(dataset: Dataset, classifier, cost, psi_list: Sequence[SubPopCondition],
          semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST
          ) -> list[tuple[MetricsReport, BoundsReport]]:
    """Metrics and the matching closed-form bounds for each psi.

    Threshold rules get the two-sided bound for the 1-D cost plus the
    unit-linear constraint value; linear rules get the exact identity under a
    linear cost vector or the upper bound under a quadratic form.
    """
    out = []
    for psi in psi_list:
        report = metrics_report(dataset, classifier, cost, psi, semantics)
        if isinstance(classifier, ThresholdClassifier):
            if not isinstance(cost, CostModel1D):
                raise SchemaError("threshold classifiers need a one-dimensional cost model")
            lo, hi = burden_gap_bounds_1d(dataset, classifier, psi, cost)
            lhs = constraint_lhs_1d(dataset, classifier.tau0, classifier.tau1, psi)
            bounds = BoundsReport(lower=lo, upper=hi, constraint_lhs=lhs)
        elif isinstance(cost, LinearCostMultiD):
            bounds = burden_gap_exact_linear(dataset, classifier, psi, cost)
        elif isinstance(cost, QuadraticCostMultiD):
            bounds = burden_gap_upper_quadratic(dataset, classifier, psi, cost)
        else:
            raise SchemaError("linear classifiers need a linear_multi or quadratic_multi cost model")
        out.append((report, bounds))
    return out


def maybe_normalize(dataset: Dataset, metadata: dict | None) -> Dataset:
    """Apply normalisation statistics stored in a classifier's metadata."""
    stats = (metadata or {}).get("normalization")
    if not stats:
        return dataset
    return apply_normalization(dataset, [tuple(s) for s in stats])
