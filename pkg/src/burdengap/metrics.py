"""Empirical selection-rate and social-burden metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import (
    Dataset,
    LinearClassifier,
    SchemaError,
    SubPopCondition,
    UndefinedMetricError,
)
from .response import ResponseSemantics, response_costs

BOUNDARY = ResponseSemantics.BOUNDARY_COST


@dataclass(frozen=True)
class GroupStats:
    """Sufficient statistics of one group under one condition and threshold.

    ``neg_mass`` is the sum of scores of the negatively classified members
    divided by ``count``, i.e. their mean score times ``neg_fraction``.
    """

    count: int
    positives: int
    burden: float
    neg_fraction: float
    neg_mass: float

    @property
    def selection_rate(self) -> float:
        return self.positives / self.count


def _mean(values: np.ndarray, count: int) -> float:
    # correctly rounded sum: independent of reduction order
    return math.fsum(values.tolist()) / count


def group_stats(scores: np.ndarray, threshold: float, costs: np.ndarray) -> GroupStats:
    n = len(scores)
    if n == 0:
        raise UndefinedMetricError("empty conditioning set")
    neg = scores < threshold
    n_neg = int(neg.sum())
    return GroupStats(
        count=n,
        positives=n - n_neg,
        burden=_mean(costs, n),
        # written as 1 - H so that P_z = 1 - H_z holds bit-exactly
        neg_fraction=1.0 - (n - n_neg) / n,
        neg_mass=_mean(scores[neg], n) if n_neg else 0.0,
    )


def _members(dataset: Dataset, psi: SubPopCondition, z: int) -> np.ndarray:
    mask = psi.mask(dataset) & (dataset.groups == z)
    if not mask.any():
        raise UndefinedMetricError(
            f"no samples with psi={psi.name} in group {z}; the conditional metric is undefined")
    return mask


def _check_dims(dataset: Dataset, classifier) -> None:
    if dataset.dim != classifier.dim:
        raise SchemaError(f"dataset has {dataset.dim} features, classifier expects {classifier.dim}")


def _check_cost(dataset: Dataset, cost) -> None:
    mask = getattr(cost, "manipulable", None)
    if mask is not None and isinstance(mask, tuple) and len(mask) == dataset.dim:
        if tuple(dataset.schema.manipulable) != mask:
            raise SchemaError("cost vector and schema disagree on which features are manipulable")


def compute_group_stats(dataset: Dataset, classifier, cost, psi: SubPopCondition, z: int,
                        semantics: ResponseSemantics = BOUNDARY) -> GroupStats:
    _check_dims(dataset, classifier)
    mask = _members(dataset, psi, z)
    X = dataset.features[mask]
    scores = classifier.scores(X)
    if cost is None:
        costs = np.zeros(len(scores))
    else:
        _check_cost(dataset, cost)
        costs = response_costs(X, classifier, z, cost, semantics)
    return group_stats(scores, classifier.threshold(z), costs)


def selection_rate(dataset: Dataset, classifier, psi: SubPopCondition, z: int) -> float:
    return compute_group_stats(dataset, classifier, None, psi, z).selection_rate


def selection_rate_gap(dataset: Dataset, classifier, psi: SubPopCondition) -> float:
    return selection_rate(dataset, classifier, psi, 0) - selection_rate(dataset, classifier, psi, 1)


def social_burden(dataset: Dataset, classifier, cost, psi: SubPopCondition, z: int,
                  semantics: ResponseSemantics = BOUNDARY) -> float:
    return compute_group_stats(dataset, classifier, cost, psi, z, semantics).burden


def social_burden_gap(dataset: Dataset, classifier, cost, psi: SubPopCondition,
                      semantics: ResponseSemantics = BOUNDARY) -> float:
    return (social_burden(dataset, classifier, cost, psi, 0, semantics)
            - social_burden(dataset, classifier, cost, psi, 1, semantics))


def empirical_P_E(dataset: Dataset, classifier, psi: SubPopCondition, z: int) -> tuple[float, float]:
    """Fraction of negatively classified members and their mean score times
    that fraction.  Scores are ``x`` in 1-D and ``u @ x`` for linear rules."""
    s = compute_group_stats(dataset, classifier, None, psi, z)
    return s.neg_fraction, s.neg_mass


def accuracy(dataset: Dataset, classifier) -> float:
    _check_dims(dataset, classifier)
    if len(dataset) == 0:
        raise UndefinedMetricError("accuracy of an empty dataset")
    pred = classifier.predict(dataset.features, dataset.groups)
    return int((pred == dataset.labels).sum()) / len(dataset)


@dataclass(frozen=True)
class FeatureBiasReport:
    biased_against_0: bool
    max_violation: float
    points_checked: int


def feature_bias_check(dataset: Dataset, psi: SubPopCondition,
                       classifier: LinearClassifier | None = None) -> FeatureBiasReport:
    """Strict dominance of group 0's ``P[X < x]`` over group 1's.

    Checked at every distinct pooled value where the pooled CDF lies strictly
    inside (0, 1); equality anywhere means "not biased".  Multi-dimensional
    data needs a linear ``classifier`` whose scores ``u @ x`` are compared.
    """
    if dataset.dim == 1 and classifier is None:
        scores = dataset.features[:, 0]
    elif classifier is not None:
        _check_dims(dataset, classifier)
        scores = classifier.scores(dataset.features)
    else:
        raise SchemaError("multi-dimensional feature bias needs a linear classifier for scores")
    s0 = np.sort(scores[_members(dataset, psi, 0)])
    s1 = np.sort(scores[_members(dataset, psi, 1)])
    pooled = np.unique(np.concatenate([s0, s1]))
    F0 = np.searchsorted(s0, pooled, side="left") / len(s0)
    F1 = np.searchsorted(s1, pooled, side="left") / len(s1)
    n_all = len(s0) + len(s1)
    Fp = (np.searchsorted(s0, pooled, side="left") + np.searchsorted(s1, pooled, side="left")) / n_all
    interior = (Fp > 0) & (Fp < 1)
    if not interior.any():
        return FeatureBiasReport(False, 0.0, 0)
    diff = F1[interior] - F0[interior]
    worst = float(diff.max())
    return FeatureBiasReport(worst < 0, worst, int(interior.sum()))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

METRICS_COLUMNS = ("psi", "accuracy", "h0", "h1", "h_gap", "g0", "g1", "g_gap",
                   "p0", "p1", "e0", "e1", "n0", "n1", "n_neg0", "n_neg1")


@dataclass(frozen=True)
class MetricsReport:
    psi: SubPopCondition
    accuracy: float
    stats0: GroupStats
    stats1: GroupStats

    @property
    def h0(self) -> float:
        return self.stats0.selection_rate

    @property
    def h1(self) -> float:
        return self.stats1.selection_rate

    @property
    def h_gap(self) -> float:
        return self.h0 - self.h1

    @property
    def g0(self) -> float:
        return self.stats0.burden

    @property
    def g1(self) -> float:
        return self.stats1.burden

    @property
    def g_gap(self) -> float:
        return self.g0 - self.g1

    @property
    def p0(self) -> float:
        return self.stats0.neg_fraction

    @property
    def p1(self) -> float:
        return self.stats1.neg_fraction

    @property
    def e0(self) -> float:
        return self.stats0.neg_mass

    @property
    def e1(self) -> float:
        return self.stats1.neg_mass

    def row(self) -> dict:
        return {
            "psi": self.psi.value, "accuracy": self.accuracy,
            "h0": self.h0, "h1": self.h1, "h_gap": self.h_gap,
            "g0": self.g0, "g1": self.g1, "g_gap": self.g_gap,
            "p0": self.p0, "p1": self.p1, "e0": self.e0, "e1": self.e1,
            "n0": self.stats0.count, "n1": self.stats1.count,
            "n_neg0": self.stats0.count - self.stats0.positives,
            "n_neg1": self.stats1.count - self.stats1.positives,
        }


def metrics_report(dataset: Dataset, classifier, cost, psi: SubPopCondition,
                   semantics: ResponseSemantics = BOUNDARY) -> MetricsReport:
    return MetricsReport(
        psi=psi,
        accuracy=accuracy(dataset, classifier),
        stats0=compute_group_stats(dataset, classifier, cost, psi, 0, semantics),
        stats1=compute_group_stats(dataset, classifier, cost, psi, 1, semantics),
    )
