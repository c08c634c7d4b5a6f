"""Classifier construction.

Group-threshold classifiers are found by exhaustive sweeps over a threshold
grid; linear classifiers by constrained log-loss minimisation with SLSQP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .bounds import bounds_from_stats, exact_gap_from_stats
from .domain import (
    PSI_SR,
    PSI_TPR,
    BurdenGapError,
    CostModel1D,
    Dataset,
    InfeasibleManipulationError,
    LinearClassifier,
    LinearCostMultiD,
    SubPopCondition,
    UndefinedMetricError,
)
from .metrics import GroupStats, group_stats
from .response import best_direction, gradient_bounds_1d, response_costs_1d


class InfeasibleError(BurdenGapError):
    """No candidate satisfies the requested constraint."""


# ---------------------------------------------------------------------------
# threshold sweeps
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("tau0", "tau1", "accuracy", "h_sr", "g_sr", "h_tpr", "g_tpr",
                 "constraint_lhs_sr", "constraint_lhs_tpr", "feasible_sr", "feasible_tpr")

NAN = float("nan")


@dataclass(frozen=True)
class SweepRecord:
    tau0: float
    tau1: float
    accuracy: float
    h: dict = field(default_factory=dict)
    g: dict = field(default_factory=dict)
    constraint_lhs: dict = field(default_factory=dict)
    feasible: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {"tau0": self.tau0, "tau1": self.tau1, "accuracy": self.accuracy}
        for psi in (PSI_SR, PSI_TPR):
            out[f"h_{psi.value}"] = self.h.get(psi, NAN)
            out[f"g_{psi.value}"] = self.g.get(psi, NAN)
        for psi in (PSI_SR, PSI_TPR):
            out[f"constraint_lhs_{psi.value}"] = self.constraint_lhs.get(psi, NAN)
        for psi in (PSI_SR, PSI_TPR):
            out[f"feasible_{psi.value}"] = self.feasible.get(psi, False)
        return out


def _correct_counts(x: np.ndarray, y: np.ndarray, grid: Sequence[float]) -> list[int]:
    pos = np.sort(x[y == 1])
    neg = np.sort(x[y == 0])
    # correct = positives at or above tau + negatives strictly below tau
    return [int(len(pos) - np.searchsorted(pos, t, side="left") + np.searchsorted(neg, t, side="left"))
            for t in grid]


def _stats_along_grid(x: np.ndarray, z: int, grid: Sequence[float], cost: CostModel1D) -> list[GroupStats | None]:
    if len(x) == 0:
        return [None] * len(grid)
    return [group_stats(x, t, response_costs_1d(x, t, z, cost)) for t in grid]


def sweep_thresholds(dataset: Dataset, grid0: Sequence[float], grid1: Sequence[float],
                     psi_list: Sequence[SubPopCondition] = (PSI_SR, PSI_TPR),
                     cost: CostModel1D | None = None, g_target: float = 0.0,
                     feature_range: tuple[float, float] | None = None) -> list[SweepRecord]:
    """Evaluate every ``(tau0, tau1)`` pair, row-major over ``grid0``.

    Per-group statistics depend on one threshold only, so they are computed
    once per grid value and shared across the row/column.  ``constraint_lhs``
    is the upper bound on the gap for the cost's gradient bounds (for unit
    linear cost it equals the gap itself); a cell is feasible when it is at
    most ``g_target``.  Cells whose conditioning set is empty get NaN.
    """
    cost = cost or CostModel1D.linear()
    grid0 = [float(t) for t in grid0]
    grid1 = [float(t) for t in grid1]
    if not grid0 or not grid1:
        raise ValueError("threshold grids must be non-empty")
    if dataset.dim != 1:
        raise ValueError("threshold sweeps need one-dimensional data")
    x_all = dataset.features[:, 0]
    if feature_range is None:
        feature_range = (min(float(x_all.min()), *grid0, *grid1), max(float(x_all.max()), *grid0, *grid1))
    grads = gradient_bounds_1d(cost, feature_range)

    n = len(dataset)
    g0, g1 = dataset.groups == 0, dataset.groups == 1
    correct0 = _correct_counts(x_all[g0], dataset.labels[g0], grid0)
    correct1 = _correct_counts(x_all[g1], dataset.labels[g1], grid1)

    per_psi = {}
    for psi in psi_list:
        m = psi.mask(dataset)
        per_psi[psi] = (_stats_along_grid(x_all[m & g0], 0, grid0, cost),
                        _stats_along_grid(x_all[m & g1], 1, grid1, cost))

    records = []
    for i, t0 in enumerate(grid0):
        for j, t1 in enumerate(grid1):
            h, g, lhs, feas = {}, {}, {}, {}
            for psi, (st0, st1) in per_psi.items():
                s0, s1 = st0[i], st1[j]
                if s0 is None or s1 is None:
                    h[psi] = g[psi] = lhs[psi] = NAN
                    feas[psi] = False
                    continue
                h[psi] = s0.selection_rate - s1.selection_rate
                g[psi] = s0.burden - s1.burden
                lhs[psi] = bounds_from_stats(t0, t1, s0, s1, grads)[1]
                feas[psi] = lhs[psi] <= g_target
            records.append(SweepRecord(t0, t1, (correct0[i] + correct1[j]) / n, h, g, lhs, feas))
    return records


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """Feasibility predicate over sweep records.

    ``kind`` is ``"lhs_at_most"`` (bound-based burden constraint),
    ``"abs_h_at_most"`` or ``"abs_g_at_most"``; ``violation`` reports how far
    a record is from feasible (<= 0 when feasible).
    """

    kind: str
    target: float
    psi: SubPopCondition = PSI_SR

    def value(self, rec: SweepRecord) -> float:
        if self.kind == "lhs_at_most":
            return rec.constraint_lhs.get(self.psi, NAN)
        if self.kind == "abs_h_at_most":
            return abs(rec.h.get(self.psi, NAN))
        if self.kind == "abs_g_at_most":
            return abs(rec.g.get(self.psi, NAN))
        if self.kind == "none":
            return -math.inf
        raise ValueError(f"unknown constraint kind {self.kind!r}")

    def violation(self, rec: SweepRecord) -> float:
        v = self.value(rec) - self.target
        return math.inf if math.isnan(v) else v

    def __call__(self, rec: SweepRecord) -> bool:
        return self.violation(rec) <= 0


UNCONSTRAINED = Constraint("none", 0.0)


def select_optimal(records: Sequence[SweepRecord], feasible: Callable[[SweepRecord], bool] = UNCONSTRAINED,
                   tie_psi: SubPopCondition = PSI_SR) -> SweepRecord:
    """Most accurate feasible record; ties go to the smaller gap, then the
    lexicographically smaller ``(tau0, tau1)``."""
    def key(r: SweepRecord):
        g = r.g.get(tie_psi, NAN)
        return (-r.accuracy, math.inf if math.isnan(g) else g, r.tau0, r.tau1)

    ok = [r for r in records if feasible(r)]
    if not ok:
        msg = "no feasible record"
        if hasattr(feasible, "violation") and records:
            tight = min(records, key=feasible.violation)
            msg += (f"; tightest violation {feasible.violation(tight):.6g} at "
                    f"tau0={tight.tau0:g}, tau1={tight.tau1:g}")
        raise InfeasibleError(msg)
    return min(ok, key=key)


# ---------------------------------------------------------------------------
# linear classifiers
# ---------------------------------------------------------------------------

PROB_CLIP = 1e-12


def _split(weights: np.ndarray, dim: int) -> tuple[np.ndarray, float, float]:
    w = np.asarray(weights, dtype=float)
    if w.size != dim + 2:
        raise ValueError(f"expected {dim + 2} weights (features + two intercepts), got {w.size}")
    return w[:dim], float(w[dim]), float(w[dim + 1])


def _margins(weights: np.ndarray, dataset: Dataset) -> np.ndarray:
    u, v0, v1 = _split(weights, dataset.dim)
    return dataset.features @ u - np.where(dataset.groups == 1, v1, v0)


def log_loss(weights, dataset: Dataset) -> float:
    """Mean logistic loss of the rule ``sigmoid(u @ x - v_z)``."""
    p = np.clip(expit(_margins(weights, dataset)), PROB_CLIP, 1 - PROB_CLIP)
    y = dataset.labels
    return float(np.mean(-y * np.log(p) - (1 - y) * np.log(1 - p)))


def log_loss_grad(weights, dataset: Dataset) -> np.ndarray:
    p = expit(_margins(weights, dataset))
    r = (p - dataset.labels) / len(dataset)
    z = dataset.groups
    return np.concatenate([dataset.features.T @ r, [-r[z == 0].sum(), -r[z == 1].sum()]])


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 100
    ftol: float = 1e-3
    fd_eps: float = 1e-3
    # slack allowed on the hard-decision constraint when flagging feasibility
    feasibility_tol: float = 1e-3

    def __post_init__(self):
        if self.max_iterations < 1 or not self.ftol > 0 or not self.fd_eps > 0 or self.feasibility_tol < 0:
            raise ValueError("solver parameters must be positive")


CONSTRAINT_KINDS = ("none", "stat_rate_at_least", "burden_gap_at_most",
                    "abs_burden_at_most", "abs_stat_rate_at_most")


@dataclass(frozen=True)
class TrainConfig:
    constraint: str = "none"
    target: float = 0.0
    psi: SubPopCondition = PSI_SR
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0

    def __post_init__(self):
        if self.constraint not in CONSTRAINT_KINDS:
            raise ValueError(f"constraint must be one of {CONSTRAINT_KINDS}")


@dataclass(frozen=True)
class TrainResult:
    classifier: LinearClassifier
    objective: float
    constraint_value: float | None
    feasible: bool
    iterations: int
    message: str


# Stand-in for the burden of a group that cannot reach the boundary at all.
UNREACHABLE_BURDEN = 1e6


def selection_gap_value(weights, dataset: Dataset, psi: SubPopCondition) -> float:
    u, v0, v1 = _split(weights, dataset.dim)
    s = dataset.features @ u
    m = psi.mask(dataset)
    rates = []
    for z, v in ((0, v0), (1, v1)):
        sel = m & (dataset.groups == z)
        if not sel.any():
            raise UndefinedMetricError(f"no samples with psi={psi.name} in group {z}")
        rates.append(float(np.count_nonzero(s[sel] >= v)) / int(sel.sum()))
    return rates[0] - rates[1]


def burden_gap_value(weights, dataset: Dataset, cost: LinearCostMultiD, psi: SubPopCondition) -> float:
    """Closed-form linear-cost burden gap for raw weights.

    Equals the exact identity whenever both groups can reach the boundary;
    a group with negatives but no usable feature is charged
    ``UNREACHABLE_BURDEN`` so the solver sees a finite, steep penalty.
    """
    u, v0, v1 = _split(weights, dataset.dim)
    s = dataset.features @ u
    m = psi.mask(dataset)
    stats, ws = [], []
    for z, v in ((0, v0), (1, v1)):
        sel = m & (dataset.groups == z)
        if not sel.any():
            raise UndefinedMetricError(f"no samples with psi={psi.name} in group {z}")
        sz = s[sel]
        n = sz.size
        neg = sz < v
        n_neg = int(neg.sum())
        stats.append(GroupStats(n, n - n_neg, 0.0, 1.0 - (n - n_neg) / n, float(sz[neg].sum()) / n if n_neg else 0.0))
        try:
            ws.append(best_direction(u, cost.vector(z))[1])
        except InfeasibleManipulationError:
            ws.append(None)
    if ws[0] is not None and ws[1] is not None:
        return exact_gap_from_stats(v0, v1, ws[0], ws[1], stats[0], stats[1])[0]
    burden = []
    for z, v, st, w in ((0, v0, stats[0], ws[0]), (1, v1, stats[1], ws[1])):
        if st.neg_fraction == 0:
            burden.append(0.0)
        elif w is None:
            burden.append(UNREACHABLE_BURDEN)
        else:
            burden.append((v * st.neg_fraction - st.neg_mass) / w)
    return burden[0] - burden[1]


def _central_diff(fun: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def _constraint_fn(config: TrainConfig, dataset: Dataset, cost):
    """Return ``c(theta)`` with ``c >= 0`` meaning feasible, or None."""
    kind, t, psi = config.constraint, config.target, config.psi
    if kind == "none":
        return None
    if kind in ("burden_gap_at_most", "abs_burden_at_most") and not isinstance(cost, LinearCostMultiD):
        raise ValueError(f"constraint {kind} needs a LinearCostMultiD cost model")
    if kind == "stat_rate_at_least":
        return lambda th: selection_gap_value(th, dataset, psi) - t
    if kind == "abs_stat_rate_at_most":
        return lambda th: t - abs(selection_gap_value(th, dataset, psi))
    if kind == "burden_gap_at_most":
        return lambda th: t - burden_gap_value(th, dataset, cost, psi)
    return lambda th: t - abs(burden_gap_value(th, dataset, cost, psi))


def train_linear(dataset: Dataset, config: TrainConfig = TrainConfig(),
                 cost: LinearCostMultiD | None = None) -> TrainResult:
    """Minimise mean log-loss of ``sigmoid(u @ x - v_z)`` under one constraint.

    Starts from zero weights.  The objective gradient is analytic; constraint
    values use hard decisions and their gradients are central differences
    with step ``config.solver.fd_eps``.

    Hard-decision constraints are piecewise constant, so SLSQP can leave a
    good feasible region late in the run.  Every iterate is therefore kept and
    the result is the lowest-objective iterate satisfying the constraint
    within ``config.solver.feasibility_tol``; when none does, the least
    violating iterate is returned with ``feasible=False``.
    """
    opts = config.solver
    theta0 = np.zeros(dataset.dim + 2)
    cfun = _constraint_fn(config, dataset, cost)
    constraints = []
    if cfun is not None:
        constraints.append({"type": "ineq", "fun": cfun,
                            "jac": lambda th: _central_diff(cfun, th, opts.fd_eps)})
    iterates = [theta0.copy()]
    res = minimize(log_loss, theta0, args=(dataset,), jac=log_loss_grad, method="SLSQP",
                   constraints=constraints, callback=lambda th: iterates.append(np.array(th, dtype=float)),
                   options={"maxiter": opts.max_iterations, "ftol": opts.ftol, "eps": opts.fd_eps})
    iterates.append(np.asarray(res.x, dtype=float))

    def summary(th):
        return float(log_loss(th, dataset)), (None if cfun is None else float(cfun(th)))

    scored = [(summary(th), k, th) for k, th in enumerate(iterates)]
    if cfun is None:
        (obj, cval), _, theta = scored[-1]
        feasible = True
    else:
        ok = [s for s in scored if s[0][1] >= -opts.feasibility_tol]
        if ok:
            (obj, cval), _, theta = min(ok, key=lambda s: (s[0][0], s[1]))
            feasible = True
        else:
            (obj, cval), _, theta = min(scored, key=lambda s: (-s[0][1], s[0][0], s[1]))
            feasible = False
    u, v0, v1 = _split(theta, dataset.dim)
    return TrainResult(LinearClassifier(u, v0, v1), obj, cval, feasible,
                       int(getattr(res, "nit", 0)), str(res.message))
