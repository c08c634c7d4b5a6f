"""Closed-form relations between the social burden gap and selection rates.

All quantities are evaluated on the empirical distribution of a dataset.
Gradient bounds are stored with their sign, so ``g_l <= g_u <= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (
    CostModel1D,
    Dataset,
    LinearClassifier,
    LinearCostMultiD,
    QuadraticCostMultiD,
    SubPopCondition,
    ThresholdClassifier,
)
from .metrics import GroupStats, compute_group_stats
from .response import best_direction, gradient_bounds_1d

UNIT_LINEAR_GRADIENTS = ((-1.0, -1.0), (-1.0, -1.0))


@dataclass(frozen=True)
class BoundsReport:
    lower: float
    upper: float
    exact: float | None = None
    delta: float | None = None
    w0_star: float | None = None
    w1_star: float | None = None
    constraint_lhs: float | None = None
    degenerate: bool = False

    def row(self) -> dict:
        return {k: getattr(self, k) for k in
                ("lower", "upper", "exact", "delta", "w0_star", "w1_star", "constraint_lhs", "degenerate")}


def bounds_from_stats(tau0: float, tau1: float, s0: GroupStats, s1: GroupStats,
                      grads: tuple[tuple[float, float], tuple[float, float]]) -> tuple[float, float]:
    """Lower and upper bound on ``G`` from per-group statistics.

    ``grads`` is ``((g_l0, g_u0), (g_l1, g_u1))``.
    """
    (gl0, gu0), (gl1, gu1) = grads
    H = s0.selection_rate - s1.selection_rate
    P0, E0, E1 = s0.neg_fraction, s0.neg_mass, s1.neg_mass
    upper = gu1 * tau1 * H + (gu1 * tau1 - gl0 * tau0) * P0 - gu1 * E1 + gl0 * E0
    lower = gl1 * tau1 * H + (gl1 * tau1 - gu0 * tau0) * P0 - gl1 * E1 + gu0 * E0
    return lower, upper


def default_feature_range(dataset: Dataset, classifier: ThresholdClassifier) -> tuple[float, float]:
    x = dataset.features[:, 0]
    lo = min(float(x.min()), classifier.tau0, classifier.tau1)
    hi = max(float(x.max()), classifier.tau0, classifier.tau1)
    return lo, hi


def burden_gap_bounds_1d(dataset: Dataset, classifier: ThresholdClassifier, psi: SubPopCondition,
                         cost: CostModel1D, feature_range: tuple[float, float] | None = None,
                         grads=None) -> tuple[float, float]:
    """Two-sided bound on the burden gap of a group-threshold classifier.

    With equal gradient bounds per group the cost is effectively linear and
    the two sides coincide with the exact gap.
    """
    if grads is None:
        grads = gradient_bounds_1d(cost, feature_range or default_feature_range(dataset, classifier))
    s0 = compute_group_stats(dataset, classifier, None, psi, 0)
    s1 = compute_group_stats(dataset, classifier, None, psi, 1)
    return bounds_from_stats(classifier.tau0, classifier.tau1, s0, s1, grads)


def constraint_lhs_from_stats(tau0: float, tau1: float, s0: GroupStats, s1: GroupStats) -> float:
    """``-tau1*H - (tau1 - tau0)*P0 + E1 - E0``: the upper bound for unit linear cost."""
    return bounds_from_stats(tau0, tau1, s0, s1, UNIT_LINEAR_GRADIENTS)[1]


def constraint_lhs_1d(dataset: Dataset, tau0: float, tau1: float, psi: SubPopCondition) -> float:
    clf = ThresholdClassifier(tau0, tau1)
    s0 = compute_group_stats(dataset, clf, None, psi, 0)
    s1 = compute_group_stats(dataset, clf, None, psi, 1)
    return constraint_lhs_from_stats(clf.tau0, clf.tau1, s0, s1)


# ---------------------------------------------------------------------------
# multi-dimensional
# ---------------------------------------------------------------------------

def exact_gap_from_stats(v0: float, v1: float, w0: float, w1: float,
                         s0: GroupStats, s1: GroupStats) -> tuple[float, float]:
    """Exact linear-cost gap and its remainder ``delta`` from group statistics."""
    H = s0.selection_rate - s1.selection_rate
    P0, E0, E1 = s0.neg_fraction, s0.neg_mass, s1.neg_mass
    delta = (v1 / w1 - v0 / w0) * P0 - E1 / w1 + E0 / w0
    return -(v1 * H) / w1 - delta, delta


def burden_gap_exact_linear(dataset: Dataset, classifier: LinearClassifier, psi: SubPopCondition,
                            cost: LinearCostMultiD) -> BoundsReport:
    """Exact burden gap of a linear rule under group-specific linear costs.

    The cheapest way to the boundary runs along the feature with the best
    weight-to-cost ratio ``w_z``, so each group's burden is
    ``(v_z * P_z - E_z) / w_z``.
    """
    _, w0 = best_direction(classifier.u, cost.d0)
    _, w1 = best_direction(classifier.u, cost.d1)
    s0 = compute_group_stats(dataset, classifier, None, psi, 0)
    s1 = compute_group_stats(dataset, classifier, None, psi, 1)
    exact, delta = exact_gap_from_stats(classifier.v0, classifier.v1, w0, w1, s0, s1)
    return BoundsReport(lower=exact, upper=exact, exact=exact, delta=delta,
                        w0_star=w0, w1_star=w1, constraint_lhs=exact)


def burden_gap_upper_quadratic(dataset: Dataset, classifier: LinearClassifier, psi: SubPopCondition,
                               cost: QuadraticCostMultiD) -> BoundsReport:
    """Upper bound on the gap under a shared quadratic-form cost.

    The largest boundary distance is taken over the observed negatively
    classified group-0 members.  If group 0 has none, the bound is 0 and the
    report is flagged ``degenerate``.
    """
    mask = psi.mask(dataset) & (dataset.groups == 0)
    s0 = compute_group_stats(dataset, classifier, None, psi, 0)
    compute_group_stats(dataset, classifier, None, psi, 1)  # group 1 must be non-empty too
    scores = classifier.scores(dataset.features[mask])
    gaps = classifier.v0 - scores
    gaps = gaps[gaps > 0]
    if gaps.size == 0:
        return BoundsReport(lower=-np.inf, upper=0.0, degenerate=True)
    q = float(classifier.u @ np.linalg.solve(cost.B, classifier.u))
    g_l0 = -2.0 * float(gaps.max()) / q
    upper = g_l0 * s0.neg_mass - g_l0 * classifier.v0 * s0.neg_fraction
    # G_0 >= 0 and G_1 <= the same bound for group 1 give no useful lower side
    return BoundsReport(lower=-np.inf, upper=upper)
