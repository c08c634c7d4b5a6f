"""Core value types: samples, datasets, sub-population conditions, classifiers
and cost models.

Everything here is immutable after construction. Datasets keep their columns
as read-only numpy arrays so the metric code can stay vectorised; ``Sample``
objects are materialised on demand.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np


class BurdenGapError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(BurdenGapError):
    """Input does not conform to the declared feature schema."""


class UndefinedMetricError(BurdenGapError):
    """A conditional metric was requested over an empty conditioning set."""


class InfeasibleManipulationError(BurdenGapError):
    """No feature can be moved to reach the decision boundary."""


class NumericalError(BurdenGapError):
    """Matrix input is singular, indefinite or too badly conditioned."""


class MonotonicityError(BurdenGapError):
    """A cost function is not decreasing in the starting point."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Samples and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    features: tuple[float, ...]
    label: int
    group: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise SchemaError(f"label must be 0 or 1, got {self.label!r}")
        if self.group not in (0, 1):
            raise SchemaError(f"group must be 0 or 1, got {self.group!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Column names, which features can be manipulated, and optional
    normalisation pairs ``(mean, std)`` captured from a training partition."""

    names: tuple[str, ...]
    manipulable: tuple[bool, ...] | None = None
    normalization: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate feature names in {names}")
        if {"y", "z"} & set(names):
            raise SchemaError("feature names 'y' and 'z' are reserved")
        if self.manipulable is None:
            object.__setattr__(self, "manipulable", (True,) * len(names))
        else:
            object.__setattr__(self, "manipulable", tuple(bool(m) for m in self.manipulable))
        if len(self.manipulable) != len(names):
            raise SchemaError("manipulable mask length does not match feature count")
        if self.normalization is not None:
            norm = tuple((float(m), float(s)) for m, s in self.normalization)
            if len(norm) != len(names):
                raise SchemaError("normalization length does not match feature count")
            for name, (_, s) in zip(names, norm):
                if not s > 0:
                    raise SchemaError(f"normalization std for {name!r} must be > 0")
            object.__setattr__(self, "normalization", norm)

    @property
    def dim(self) -> int:
        return len(self.names)

    @classmethod
    def default(cls, dim: int) -> "FeatureSchema":
        names = ("x",) if dim == 1 else tuple(f"x{i}" for i in range(dim))
        return cls(names)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columnar dataset: ``features`` is ``(n, d)``, ``labels`` and ``groups``
    are 0/1 integer vectors of length ``n``."""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise SchemaError("features must be a 2-D array")
        y = np.array(self.labels).reshape(-1)
        z = np.array(self.groups).reshape(-1)
        if not (len(X) == len(y) == len(z)):
            raise SchemaError("features, labels and groups differ in length")
        if X.shape[1] != self.schema.dim:
            raise SchemaError(
                f"features have {X.shape[1]} columns, schema declares {self.schema.dim}")
        for col, arr in (("y", y), ("z", z)):
            if arr.size and not np.isin(arr, (0, 1)).all():
                raise SchemaError(f"column {col} must contain only 0 and 1")
        if not np.isfinite(X).all():
            raise SchemaError("features must be finite")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "labels", _readonly(y.astype(np.int8)))
        object.__setattr__(self, "groups", _readonly(z.astype(np.int8)))

    @classmethod
    def from_arrays(cls, features, labels, groups, schema: FeatureSchema | None = None) -> "Dataset":
        X = np.asarray(features, dtype=float)
        dim = 1 if X.ndim == 1 else X.shape[1]
        return cls(X, labels, groups, schema or FeatureSchema.default(dim))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], schema: FeatureSchema | None = None) -> "Dataset":
        if not samples and schema is None:
            raise SchemaError("cannot infer a schema from an empty sample list")
        dim = schema.dim if schema is not None else len(samples[0].features)
        X = np.array([s.features for s in samples], dtype=float).reshape(len(samples), dim)
        return cls(X, [s.label for s in samples], [s.group for s in samples],
                   schema or FeatureSchema.default(dim))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[Sample]:
        for x, y, z in zip(self.features, self.labels, self.groups):
            yield Sample(tuple(float(v) for v in x), int(y), int(z))

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, index) -> "Dataset":
        idx = np.asarray(index)
        return Dataset(self.features[idx], self.labels[idx], self.groups[idx], self.schema)

    def with_schema(self, schema: FeatureSchema) -> "Dataset":
        return Dataset(self.features, self.labels, self.groups, schema)

    def equals(self, other: "Dataset") -> bool:
        return (self.schema == other.schema
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.groups, other.groups))


# ---------------------------------------------------------------------------
# Sub-population conditions
# ---------------------------------------------------------------------------

class SubPopCondition(enum.Enum):
    ALL = "sr"
    POSITIVE_LABEL = "tpr"

    def mask(self, dataset: Dataset) -> np.ndarray:
        if self is SubPopCondition.ALL:
            return np.ones(len(dataset), dtype=bool)
        return dataset.labels == 1

    @classmethod
    def parse(cls, text: str) -> "SubPopCondition":
        key = text.strip().lower()
        aliases = {"sr": cls.ALL, "all": cls.ALL, "tpr": cls.POSITIVE_LABEL,
                   "positive": cls.POSITIVE_LABEL, "positivelabel": cls.POSITIVE_LABEL}
        if key not in aliases:
            raise ValueError(f"unknown sub-population condition {text!r}")
        return aliases[key]


PSI_SR = SubPopCondition.ALL
PSI_TPR = SubPopCondition.POSITIVE_LABEL


def evaluate_psi(condition: SubPopCondition, sample: Sample) -> int:
    if condition is SubPopCondition.ALL:
        return 1
    return int(sample.label == 1)


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdClassifier:
    """One-dimensional rule: positive iff ``x >= tau_z``."""

    tau0: float
    tau1: float

    def __post_init__(self):
        for name in ("tau0", "tau1"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise SchemaError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    dim = 1

    def threshold(self, z: int) -> float:
        return self.tau1 if z else self.tau0

    def thresholds(self, groups: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(groups) == 1, self.tau1, self.tau0)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise SchemaError(f"threshold classifier needs 1 feature, got {X.shape[1]}")
            X = X[:, 0]
        return X

    def predict(self, X: np.ndarray, groups: np.ndarray) -> np.ndarray:
        return (self.scores(X) >= self.thresholds(groups)).astype(np.int8)

    def to_dict(self) -> dict:
        return {"kind": "threshold", "tau0": self.tau0, "tau1": self.tau1}


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    """Linear rule: positive iff ``u @ x >= v_z``."""

    u: np.ndarray
    v0: float
    v1: float

    def __post_init__(self):
        u = np.array(self.u, dtype=float).reshape(-1)
        if u.size == 0 or not np.isfinite(u).all():
            raise SchemaError("weights must be a non-empty finite vector")
        object.__setattr__(self, "u", _readonly(u))
        object.__setattr__(self, "v0", float(self.v0))
        object.__setattr__(self, "v1", float(self.v1))

    def __eq__(self, other):
        return (isinstance(other, LinearClassifier) and np.array_equal(self.u, other.u)
                and self.v0 == other.v0 and self.v1 == other.v1)

    @property
    def dim(self) -> int:
        return self.u.size

    def threshold(self, z: int) -> float:
        return self.v1 if z else self.v0

    def thresholds(self, groups: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(groups) == 1, self.v1, self.v0)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.dim:
            raise SchemaError(f"classifier expects {self.dim} features, got {X.shape[1]}")
        return X @ self.u

    def predict(self, X: np.ndarray, groups: np.ndarray) -> np.ndarray:
        return (self.scores(X) >= self.thresholds(groups)).astype(np.int8)

    def to_dict(self) -> dict:
        return {"kind": "linear", "u": [float(w) for w in self.u], "v0": self.v0, "v1": self.v1}


Classifier = ThresholdClassifier | LinearClassifier


def classify(classifier: Classifier, sample: Sample) -> int:
    x = np.asarray(sample.features, dtype=float)
    if x.size != classifier.dim:
        raise SchemaError(f"sample has {x.size} features, classifier expects {classifier.dim}")
    if isinstance(classifier, ThresholdClassifier):
        score = float(x[0])
    else:
        score = float(x @ classifier.u)
    return int(score >= classifier.threshold(sample.group))


def classifier_from_dict(data: dict) -> Classifier:
    if not isinstance(data, dict) or "kind" not in data:
        raise SchemaError("classifier JSON must be an object with a 'kind' field")
    kind = data["kind"]
    required = {"threshold": ("tau0", "tau1"), "linear": ("u", "v0", "v1")}.get(kind)
    if required is None:
        raise SchemaError(f"unknown classifier kind {kind!r}")
    missing = [k for k in required if k not in data]
    if missing:
        raise SchemaError(f"{kind} classifier JSON missing field(s): {', '.join(missing)}")
    try:
        if kind == "threshold":
            return ThresholdClassifier(float(data["tau0"]), float(data["tau1"]))
        return LinearClassifier(np.asarray(data["u"], dtype=float), float(data["v0"]), float(data["v1"]))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"invalid {kind} classifier field: {exc}") from exc


def dumps_classifier(classifier: Classifier, metadata: dict | None = None) -> str:
    payload = classifier.to_dict()
    if metadata is not None:
        payload["metadata"] = metadata
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def loads_classifier(text: str) -> Classifier:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"classifier file is not valid JSON: {exc}") from exc
    return classifier_from_dict(data)


# ---------------------------------------------------------------------------
# Cost models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CostModel1D:
    """Per-group one-dimensional cost ``c_z(x1, x2) = d_z(x1, x2) * 1(x2 > x1)``.

    ``kind`` is ``"linear"`` (``a_z * (x2 - x1)``), ``"quadratic"``
    (``a_z * (x2**2 - x1**2)``) or ``"custom"`` (vectorised callables in
    ``functions``).  Gradient bounds are obtained through
    :func:`burdengap.response.gradient_bounds_1d`.
    """

    kind: str = "linear"
    scale: tuple[float, float] = (1.0, 1.0)
    functions: tuple[Callable, Callable] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic", "custom"):
            raise ValueError(f"unknown 1-D cost kind {self.kind!r}")
        scale = tuple(float(a) for a in self.scale)
        if len(scale) != 2 or not all(a > 0 and math.isfinite(a) for a in scale):
            raise ValueError("cost scales must be two positive finite numbers")
        object.__setattr__(self, "scale", scale)
        if self.kind == "custom" and (self.functions is None or len(self.functions) != 2):
            raise ValueError("custom cost needs one function per group")

    @classmethod
    def linear(cls, a0: float = 1.0, a1: float = 1.0) -> "CostModel1D":
        return cls("linear", (a0, a1))

    @classmethod
    def quadratic(cls, a0: float = 1.0, a1: float = 1.0) -> "CostModel1D":
        return cls("quadratic", (a0, a1))

    @classmethod
    def custom(cls, d0: Callable, d1: Callable) -> "CostModel1D":
        return cls("custom", (1.0, 1.0), (d0, d1))

    def d(self, z: int, x1, x2):
        """Uncut cost ``d_z``; accepts scalars or arrays."""
        a = self.scale[1 if z else 0]
        if self.kind == "linear":
            return a * (np.subtract(x2, x1))
        if self.kind == "quadratic":
            return a * (np.square(x2) - np.square(x1))
        return self.functions[1 if z else 0](x1, x2)

    def cost(self, z: int, x1, x2):
        """Full cost, zero unless ``x2 > x1``."""
        return np.where(np.greater(x2, x1), self.d(z, x1, x2), 0.0)

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom costs are not serialisable")
        return {"kind": self.kind, "scale": list(self.scale)}


@dataclass(frozen=True, eq=False)
class LinearCostMultiD:
    """Per-group linear cost vectors; ``inf`` marks a non-manipulable feature."""

    d0: np.ndarray
    d1: np.ndarray

    def __post_init__(self):
        vecs = []
        for name in ("d0", "d1"):
            d = np.array(getattr(self, name), dtype=float).reshape(-1)
            if np.isnan(d).any() or (d <= 0).any():
                raise ValueError(f"{name} entries must lie in (0, inf]")
            if not np.isfinite(d).any():
                raise ValueError(f"{name} has no manipulable feature")
            vecs.append(_readonly(d))
        if vecs[0].size != vecs[1].size:
            raise ValueError("d0 and d1 differ in length")
        object.__setattr__(self, "d0", vecs[0])
        object.__setattr__(self, "d1", vecs[1])

    @classmethod
    def scaled(cls, base: Sequence[float], multiplier0: float = 1.0, multiplier1: float = 1.0) -> "LinearCostMultiD":
        base = np.asarray(base, dtype=float)
        return cls(base * multiplier0, base * multiplier1)

    @property
    def dim(self) -> int:
        return self.d0.size

    def vector(self, z: int) -> np.ndarray:
        return self.d1 if z else self.d0

    @property
    def manipulable(self) -> tuple[bool, ...]:
        return tuple(bool(a or b) for a, b in zip(np.isfinite(self.d0), np.isfinite(self.d1)))

    def cost(self, z: int, x1, x2) -> float:
        step = np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float)
        if (step <= 0).all():
            return 0.0
        d = self.vector(z)
        moved = step > 0
        if (step < 0).any() or not np.isfinite(d[moved]).all():
            return math.inf
        return float(d[moved] @ step[moved])

    def to_dict(self) -> dict:
        enc = lambda d: [float(v) if math.isfinite(v) else "inf" for v in d]  # noqa: E731
        return {"kind": "linear_multi", "d0": enc(self.d0), "d1": enc(self.d1)}


@dataclass(frozen=True, eq=False)
class QuadraticCostMultiD:
    """Shared quadratic-form cost ``(x' - x)^T B (x' - x)``."""

    B: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise NumericalError("B must be a square matrix")
        if not np.isfinite(B).all():
            raise NumericalError("B must be finite")
        if np.max(np.abs(B - B.T), initial=0.0) > 1e-12:
            raise NumericalError("B must be symmetric")
        try:
            np.linalg.cholesky(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("B must be positive definite") from exc
        if np.linalg.cond(B) > 1e12:
            raise NumericalError("B is too badly conditioned (cond > 1e12)")
        object.__setattr__(self, "B", _readonly(B))

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    def cost(self, z: int, x1, x2) -> float:
        step = np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float)
        if (step <= 0).all():
            return 0.0
        return float(step @ self.B @ step)

    def to_dict(self) -> dict:
        return {"kind": "quadratic_multi", "B": self.B.tolist()}


CostModel = CostModel1D | LinearCostMultiD | QuadraticCostMultiD


def cost_from_dict(data: dict) -> CostModel:
    kind = data.get("kind")
    if kind in ("linear", "quadratic"):
        scale = data.get("scale", [1.0, 1.0])
        return CostModel1D(kind, tuple(scale))
    if kind == "linear_multi":
        dec = lambda d: [math.inf if v in ("inf", "Infinity", None) else float(v) for v in d]  # noqa: E731
        if "base" in data:
            return LinearCostMultiD.scaled(dec(data["base"]), data.get("multiplier0", 1.0),
                                           data.get("multiplier1", 1.0))
        return LinearCostMultiD(dec(data["d0"]), dec(data["d1"]))
    if kind == "quadratic_multi":
        return QuadraticCostMultiD(np.asarray(data["B"], dtype=float))
    raise SchemaError(f"unknown cost kind {kind!r}")
