"""Strategic best responses against threshold and linear classifiers.

Two behavioural models are supported.  Under ``BOUNDARY_COST`` every
negatively classified individual moves to the decision boundary and pays the
cheapest way there; this is the quantity the burden bounds integrate.  Under
``RATIONAL`` an individual only moves when the gain of a positive decision
(worth 1) covers the cost.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .domain import (
    CostModel1D,
    InfeasibleManipulationError,
    LinearClassifier,
    LinearCostMultiD,
    MonotonicityError,
    NumericalError,
    QuadraticCostMultiD,
    ThresholdClassifier,
)

# The quadratic boundary condition is checked against this absolute slack.
BOUNDARY_TOL = 1e-9


class ResponseSemantics(enum.Enum):
    BOUNDARY_COST = "boundary"
    RATIONAL = "rational"


@dataclass(frozen=True, eq=False)
class BestResponse:
    point: np.ndarray | float
    cost: float
    # quadratic responses only: the move decreases some feature
    nonmonotone: bool = False


def _accept(cost: float, semantics: ResponseSemantics) -> bool:
    return semantics is ResponseSemantics.BOUNDARY_COST or cost <= 1.0


# ---------------------------------------------------------------------------
# one dimension
# ---------------------------------------------------------------------------

def best_response_1d(x: float, classifier: ThresholdClassifier, z: int, cost: CostModel1D,
                     semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> BestResponse:
    tau = classifier.threshold(z)
    x = float(x)
    if x >= tau:
        return BestResponse(x, 0.0)
    paid = float(cost.d(z, x, tau))
    if _accept(paid, semantics):
        return BestResponse(tau, paid)
    return BestResponse(x, 0.0)


def response_costs_1d(x: np.ndarray, tau: float, z: int, cost: CostModel1D,
                      semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> np.ndarray:
    """Vectorised cost paid by every point in ``x`` (all from group ``z``)."""
    x = np.asarray(x, dtype=float)
    neg = x < tau
    out = np.zeros_like(x)
    if neg.any():
        out[neg] = cost.d(z, x[neg], tau)
    if semantics is ResponseSemantics.RATIONAL:
        out[out > 1.0] = 0.0
    return out


def gradient_bounds_1d(cost: CostModel1D, feature_range: tuple[float, float],
                       grid_points: int = 1000, margin: float = 0.05) -> tuple[tuple[float, float], tuple[float, float]]:
    """Bounds ``(g_l, g_u)`` on ``d d_z / d x1`` for each group over ``feature_range``.

    Built-in costs use the analytic derivative.  Custom costs are probed with
    central differences on a ``grid_points`` grid over pairs ``x1 <= x2`` and
    the extremes are widened by ``margin`` (relative).
    """
    lo, hi = (float(v) for v in feature_range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ValueError(f"feature range must be a finite interval, got {feature_range}")
    out = []
    for z in (0, 1):
        a = cost.scale[z]
        if cost.kind == "linear":
            g_l = g_u = -a
        elif cost.kind == "quadratic":
            g_l, g_u = -2.0 * a * hi, -2.0 * a * lo
        else:
            g_l, g_u = _sampled_gradient_bounds(cost, z, lo, hi, grid_points)
            g_l -= margin * abs(g_l)
            g_u = min(g_u + margin * abs(g_u), 0.0)
        if not g_l <= g_u <= 0.0:
            raise MonotonicityError(
                f"group {z} cost gradient bounds ({g_l}, {g_u}) violate g_l <= g_u <= 0 on [{lo}, {hi}]")
        out.append((float(g_l), float(g_u)))
    return out[0], out[1]


def _sampled_gradient_bounds(cost: CostModel1D, z: int, lo: float, hi: float, n: int) -> tuple[float, float]:
    grid = np.linspace(lo, hi, n)
    h = max(hi - lo, 1.0) * 1e-6
    x1, x2 = np.meshgrid(grid, grid, indexing="ij")
    keep = x1 <= x2
    x1, x2 = x1[keep], x2[keep]
    grad = (np.asarray(cost.d(z, x1 + h, x2), dtype=float)
            - np.asarray(cost.d(z, x1 - h, x2), dtype=float)) / (2 * h)
    if not np.isfinite(grad).all():
        raise MonotonicityError(f"group {z} cost gradient is not finite on the sampled grid")
    if (grad > 0).any():
        raise MonotonicityError(
            f"group {z} cost increases in the starting point (max sampled gradient {grad.max():.3g})")
    return float(grad.min()), float(grad.max())


# ---------------------------------------------------------------------------
# linear classifier, linear cost
# ---------------------------------------------------------------------------

def best_direction(u: np.ndarray, d: np.ndarray) -> tuple[int, float]:
    """Index and value of the best cost-efficiency ratio ``max_i u_i / d_i``.

    Features with infinite cost or non-positive weight never help; the lowest
    index wins ties.
    """
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    usable = np.isfinite(d) & (u > 0)
    if not usable.any():
        raise InfeasibleManipulationError("no manipulable feature with positive weight")
    ratio = np.full(u.shape, -np.inf)
    ratio[usable] = u[usable] / d[usable]
    i = int(np.argmax(ratio))
    return i, float(ratio[i])


def best_response_linear(x, classifier: LinearClassifier, z: int, cost: LinearCostMultiD,
                         semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> BestResponse:
    x = np.asarray(x, dtype=float).reshape(-1)
    v = classifier.threshold(z)
    gap = v - float(x @ classifier.u)
    if gap <= 0:
        return BestResponse(x.copy(), 0.0)
    d = cost.vector(z)
    i, w = best_direction(classifier.u, d)
    paid = gap / w
    if not _accept(paid, semantics):
        return BestResponse(x.copy(), 0.0)
    moved = x.copy()
    moved[i] += paid / d[i]
    return BestResponse(moved, paid)


def response_costs_linear(X: np.ndarray, classifier: LinearClassifier, z: int, cost: LinearCostMultiD,
                          semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> np.ndarray:
    """Vectorised best-response cost for rows of ``X`` (all from group ``z``).

    The cost is read off the actual move (``d_i * step_i`` along the best
    direction) rather than from the closed form.
    """
    X = np.asarray(X, dtype=float)
    s = classifier.scores(X)
    neg = s < classifier.threshold(z)
    out = np.zeros(len(X))
    if not neg.any():
        return out
    d = cost.vector(z)
    i, w = best_direction(classifier.u, d)
    step = (classifier.threshold(z) - s[neg]) / w / d[i]
    out[neg] = d[i] * step
    if semantics is ResponseSemantics.RATIONAL:
        out[out > 1.0] = 0.0
    return out


# ---------------------------------------------------------------------------
# linear classifier, quadratic cost
# ---------------------------------------------------------------------------

def _solve_direction(cost: QuadraticCostMultiD, u: np.ndarray) -> tuple[np.ndarray, float]:
    Binv_u = np.linalg.solve(cost.B, u)
    q = float(u @ Binv_u)
    if not q > 0:
        raise NumericalError("u^T B^-1 u must be positive")
    return Binv_u, q


def best_response_quadratic(x, classifier: LinearClassifier, z: int, cost: QuadraticCostMultiD,
                            semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> BestResponse:
    """Closed-form move onto the boundary.

    The componentwise constraint ``x' >= x`` is not imposed; when ``B^-1 u``
    has a negative entry the result carries ``nonmonotone=True``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    v = classifier.threshold(z)
    gap = v - float(x @ classifier.u)
    if gap <= 0:
        return BestResponse(x.copy(), 0.0)
    Binv_u, q = _solve_direction(cost, classifier.u)
    paid = gap * gap / q
    if not _accept(paid, semantics):
        return BestResponse(x.copy(), 0.0)
    lam = 2.0 * gap / q
    moved = x + 0.5 * lam * Binv_u
    if abs(float(moved @ classifier.u) - v) > BOUNDARY_TOL * max(1.0, abs(v)):
        raise NumericalError("quadratic best response missed the decision boundary")
    return BestResponse(moved, paid, nonmonotone=bool((Binv_u < 0).any()))


def response_costs_quadratic(X: np.ndarray, classifier: LinearClassifier, z: int, cost: QuadraticCostMultiD,
                             semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> np.ndarray:
    """Vectorised quadratic best-response cost, evaluated as ``step^T B step``."""
    X = np.asarray(X, dtype=float)
    s = classifier.scores(X)
    gap = classifier.threshold(z) - s
    neg = gap > 0
    out = np.zeros(len(X))
    if not neg.any():
        return out
    Binv_u, q = _solve_direction(cost, classifier.u)
    steps = np.outer(gap[neg] / q, Binv_u)
    out[neg] = np.einsum("ij,jk,ik->i", steps, cost.B, steps)
    if semantics is ResponseSemantics.RATIONAL:
        out[out > 1.0] = 0.0
    return out


def response_costs(X: np.ndarray, classifier, z: int, cost,
                   semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> np.ndarray:
    """Dispatch on the classifier/cost pair."""
    if isinstance(classifier, ThresholdClassifier) and isinstance(cost, CostModel1D):
        return response_costs_1d(classifier.scores(X), classifier.threshold(z), z, cost, semantics)
    if isinstance(classifier, LinearClassifier) and isinstance(cost, LinearCostMultiD):
        return response_costs_linear(X, classifier, z, cost, semantics)
    if isinstance(classifier, LinearClassifier) and isinstance(cost, QuadraticCostMultiD):
        return response_costs_quadratic(X, classifier, z, cost, semantics)
    raise TypeError(f"cost model {type(cost).__name__} is incompatible with {type(classifier).__name__}")


def best_response(x, classifier, z: int, cost,
                  semantics: ResponseSemantics = ResponseSemantics.BOUNDARY_COST) -> BestResponse:
    if isinstance(classifier, ThresholdClassifier) and isinstance(cost, CostModel1D):
        return best_response_1d(float(np.asarray(x).reshape(-1)[0]), classifier, z, cost, semantics)
    if isinstance(classifier, LinearClassifier) and isinstance(cost, LinearCostMultiD):
        return best_response_linear(x, classifier, z, cost, semantics)
    if isinstance(classifier, LinearClassifier) and isinstance(cost, QuadraticCostMultiD):
        return best_response_quadratic(x, classifier, z, cost, semantics)
    raise TypeError(f"cost model {type(cost).__name__} is incompatible with {type(classifier).__name__}")
