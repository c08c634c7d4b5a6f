"""Dataset generation, CSV ingestion, normalisation and splitting.

Randomness comes from numpy's PCG64 bit generator (``numpy.random.PCG64``,
the 128-bit-state permuted congruential generator, 64-bit output).  A master
seed is turned into per-repetition streams with ``numpy.random.SeedSequence``
via :func:`rng_for`, so repetition ``k`` of an experiment always draws from
``SeedSequence([master, k])`` regardless of how many repetitions run.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .domain import Dataset, FeatureSchema, SchemaError

SCORE_MIN, SCORE_MAX = 1, 100


def rng_for(seed, *counter: int) -> np.random.Generator:
    """PCG64 stream for ``seed`` (an int or a tuple of ints) extended by
    ``counter``."""
    base = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([*map(int, base), *map(int, counter)])))


# ---------------------------------------------------------------------------
# synthetic one-dimensional data
# ---------------------------------------------------------------------------

def generate_synthetic_1d(mu0: float, mu1: float, sigma0: float, n_per_group: int = 500,
                          seed: int = 0) -> Dataset:
    """Two Gaussian groups with ``sigma1 = sigma0 / 2``.

    A member ``x`` of group ``z`` is labelled 1 with probability
    ``(x + min X_z) / (max X_z + min X_z)`` computed on the realised group
    sample and clipped to [0, 1].
    """
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    if n_per_group < 2:
        raise ValueError("need at least two samples per group")
    rng = rng_for(seed)
    xs, ys = [], []
    for mu, sigma in ((mu0, sigma0), (mu1, sigma0 / 2)):
        x = rng.normal(mu, sigma, n_per_group)
        lo, hi = x.min(), x.max()
        denom = hi + lo
        p = (x + lo) / denom if denom != 0 else np.full_like(x, 0.5)
        p = np.clip(p, 0.0, 1.0)
        ys.append((rng.random(n_per_group) < p).astype(np.int8))
        xs.append(x)
    z = np.repeat(np.array([0, 1], dtype=np.int8), n_per_group)
    return Dataset(np.concatenate(xs).reshape(-1, 1), np.concatenate(ys), z, FeatureSchema(("x",)))


# ---------------------------------------------------------------------------
# CDF tables
# ---------------------------------------------------------------------------

CDF_COLUMNS = ("score", "cdf_group0", "cdf_group1", "p_positive_group0", "p_positive_group1")


@dataclass(frozen=True, eq=False)
class CdfTables:
    """Per-group score CDFs over ``scores`` and per-score positive-label
    probabilities, plus the number of individuals to draw per group."""

    scores: np.ndarray
    cdf: tuple[np.ndarray, np.ndarray]
    p_positive: tuple[np.ndarray, np.ndarray]
    counts: tuple[int, int] = (116_000, 16_000)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 1 or scores.size == 0 or (np.diff(scores) <= 0).any():
            raise SchemaError("scores must be a strictly increasing non-empty vector")
        cdf = tuple(np.asarray(c, dtype=float) for c in self.cdf)
        pp = tuple(np.asarray(p, dtype=float) for p in self.p_positive)
        for z in (0, 1):
            if cdf[z].shape != scores.shape or pp[z].shape != scores.shape:
                raise SchemaError("table columns differ in length")
            if (cdf[z] < 0).any() or (np.diff(cdf[z]) < 0).any():
                raise SchemaError(f"cdf_group{z} is not non-decreasing")
            if abs(cdf[z][-1] - 1.0) > 1e-9:
                raise SchemaError(f"cdf_group{z} ends at {cdf[z][-1]}, not 1")
            if ((pp[z] < 0) | (pp[z] > 1)).any() or not np.isfinite(pp[z]).all():
                raise SchemaError(f"p_positive_group{z} must lie in [0, 1]")
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != 2 or min(counts) < 1:
            raise SchemaError("counts must be two positive integers")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "cdf", cdf)
        object.__setattr__(self, "p_positive", pp)
        object.__setattr__(self, "counts", counts)

    def with_counts(self, n0: int, n1: int) -> "CdfTables":
        return CdfTables(self.scores, self.cdf, self.p_positive, (n0, n1))


def parse_cdf_tables(text: str, counts: tuple[int, int] = (116_000, 16_000)) -> CdfTables:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows or tuple(c.strip() for c in rows[0]) != CDF_COLUMNS:
        raise SchemaError(f"CDF table header must be {','.join(CDF_COLUMNS)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"non-numeric cell in CDF table: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(CDF_COLUMNS):
        raise SchemaError("CDF table rows must have five columns")
    return CdfTables(data[:, 0], (data[:, 1], data[:, 2]), (data[:, 3], data[:, 4]), counts)


def load_cdf_tables(path, counts: tuple[int, int] = (116_000, 16_000)) -> CdfTables:
    return parse_cdf_tables(Path(path).read_text(encoding="utf-8"), counts)


def surrogate_cdf_tables(counts: tuple[int, int] = (116_000, 16_000)) -> CdfTables:
    """Bundled synthetic stand-in for credit-score aggregate tables."""
    text = resources.files("burdengap").joinpath("data/fico_surrogate.csv").read_text(encoding="utf-8")
    return parse_cdf_tables(text, counts)


def sample_from_cdf_tables(tables: CdfTables, seed: int = 0) -> Dataset:
    """Inverse-CDF draw of scores per group, then Bernoulli labels."""
    rng = rng_for(seed)
    xs, ys, zs = [], [], []
    for z in (0, 1):
        n = tables.counts[z]
        idx = np.searchsorted(tables.cdf[z], rng.random(n), side="right")
        idx = np.minimum(idx, tables.scores.size - 1)
        xs.append(tables.scores[idx])
        ys.append((rng.random(n) < tables.p_positive[z][idx]).astype(np.int8))
        zs.append(np.full(n, z, dtype=np.int8))
    return Dataset(np.concatenate(xs).reshape(-1, 1), np.concatenate(ys), np.concatenate(zs),
                   FeatureSchema(("score",)))


# ---------------------------------------------------------------------------
# multi-dimensional synthetic data
# ---------------------------------------------------------------------------

ADULT_LIKE_FEATURES = ("age", "class_of_worker", "education", "marital_status", "occupation",
                       "place_of_birth", "hours_per_week", "sex", "relationship")
ADULT_LIKE_MANIPULABLE = ("class_of_worker", "occupation", "hours_per_week")
ADULT_COST_BASE = {"class_of_worker": 100.0, "occupation": 10.0, "hours_per_week": 1.0}
ADULT_GROUP0_MULTIPLIER = 2.0


def adult_cost_base(names=ADULT_LIKE_FEATURES) -> list[float]:
    return [ADULT_COST_BASE.get(n, math.inf) for n in names]


def generate_adult_like(n: int = 20_000, seed: int = 0, group0_fraction: float = 0.2) -> Dataset:
    """Nine-feature income-style dataset with a minority group 0 whose
    feature values sit lower on average.

    A latent variable, shifted down for group 0, drives both the observed
    features and the logistic label model; the label never depends on the
    group directly.
    """
    rng = rng_for(seed)
    z = (rng.random(n) >= group0_fraction).astype(np.int8)
    shift = np.where(z == 0, -0.6, 0.0)
    latent = rng.normal(0.0, 1.0, n) + shift
    cols = {
        "age": rng.normal(42, 12, n) + 4 * latent,
        "class_of_worker": rng.integers(1, 9, n) + 0.8 * latent,
        "education": np.clip(np.round(16 + 3 * latent + rng.normal(0, 2, n)), 1, 24),
        "marital_status": rng.integers(1, 6, n).astype(float),
        "occupation": rng.normal(5, 2, n) + 1.5 * latent,
        "place_of_birth": rng.integers(1, 60, n).astype(float),
        "hours_per_week": rng.normal(40, 10, n) + 6 * latent,
        "sex": rng.integers(1, 3, n).astype(float),
        "relationship": rng.integers(0, 6, n).astype(float),
    }
    X = np.column_stack([cols[name] for name in ADULT_LIKE_FEATURES])
    logit = (0.9 * latent + 0.05 * (cols["hours_per_week"] - 40) + 0.15 * (cols["occupation"] - 5)
             + 0.1 * (cols["class_of_worker"] - 5) - 1.0)
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(np.int8)
    schema = FeatureSchema(ADULT_LIKE_FEATURES, tuple(f in ADULT_LIKE_MANIPULABLE for f in ADULT_LIKE_FEATURES))
    return Dataset(X, y, z, schema)


# ---------------------------------------------------------------------------
# CSV datasets
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*dataset.schema.names, "y", "z"])
        for x, y, z in zip(dataset.features, dataset.labels, dataset.groups):
            w.writerow([*(_fmt(v) for v in x), int(y), int(z)])


def load_csv_dataset(path, schema: FeatureSchema | None = None) -> Dataset:
    """Read ``feature..., y, z`` columns.  Normalisation is not applied here."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    for col in ("y", "z"):
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    names = tuple(schema.names) if schema is not None else tuple(c for c in header if c not in ("y", "z"))
    missing = [c for c in names if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing feature column(s) {', '.join(missing)}")
    idx = [header.index(c) for c in names]
    iy, iz = header.index("y"), header.index("z")
    X, Y, Z = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
        try:
            X.append([float(row[i]) for i in idx])
        except ValueError:
            bad = next(header[i] for i in idx if not _is_float(row[i]))
            raise SchemaError(f"{path}: row {lineno}, column {bad!r}: non-numeric value") from None
        for col, i, out in (("y", iy, Y), ("z", iz, Z)):
            cell = row[i].strip()
            if cell not in ("0", "1"):
                raise SchemaError(f"{path}: row {lineno}, column {col!r}: expected 0 or 1, got {cell!r}")
            out.append(int(cell))
    if schema is None:
        schema = FeatureSchema(names)
    X = np.array(X, dtype=float).reshape(len(X), len(names))
    return Dataset(X, np.array(Y, dtype=np.int8), np.array(Z, dtype=np.int8), schema)


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# normalisation and splitting
# ---------------------------------------------------------------------------

def fit_normalization(train: Dataset) -> tuple[tuple[float, float], ...]:
    X = train.features
    stats = []
    for j, name in enumerate(train.schema.names):
        col = X[:, j]
        mean = math.fsum(col.tolist()) / len(col)
        std = math.sqrt(math.fsum(((col - mean) ** 2).tolist()) / len(col))
        if not std > 0:
            raise SchemaError(f"feature {name!r} has zero variance in the training partition")
        stats.append((mean, std))
    return tuple(stats)


def apply_normalization(dataset: Dataset, stats) -> Dataset:
    stats = tuple((float(m), float(s)) for m, s in stats)
    mean = np.array([m for m, _ in stats])
    std = np.array([s for _, s in stats])
    schema = FeatureSchema(dataset.schema.names, dataset.schema.manipulable, stats)
    return Dataset((dataset.features - mean) / std, dataset.labels, dataset.groups, schema)


def normalize_fit_apply(train: Dataset, *others: Dataset):
    """Standardise every partition with the training partition's column
    statistics.  Returns ``(train, *others, stats)``."""
    stats = fit_normalization(train)
    return (apply_normalization(train, stats), *(apply_normalization(d, stats) for d in others), stats)


def train_test_split(dataset: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0 <= test_fraction < 1:
        raise ValueError("test_fraction must be in [0, 1)")
    n = len(dataset)
    n_test = int(math.floor(n * test_fraction))
    perm = rng_for(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)
