import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from burdengap.datagen import (
    ADULT_LIKE_FEATURES,
    CdfTables,
    adult_cost_base,
    apply_normalization,
    fit_normalization,
    generate_adult_like,
    generate_synthetic_1d,
    load_csv_dataset,
    normalize_fit_apply,
    parse_cdf_tables,
    rng_for,
    sample_from_cdf_tables,
    surrogate_cdf_tables,
    train_test_split,
    write_csv_dataset,
)
from burdengap.domain import PSI_SR, Dataset, FeatureSchema, SchemaError
from burdengap.metrics import feature_bias_check

SCORES = np.arange(1, 101, dtype=float)


def _tables(cdf0, cdf1, counts=(1000, 1000), p=0.5):
    pp = np.full(SCORES.size, p)
    return CdfTables(SCORES, (cdf0, cdf1), (pp, pp), counts)


def test_rng_streams_are_reproducible_and_distinct():
    assert rng_for(5, 1).random() == rng_for(5, 1).random()
    assert rng_for((5, 1)).random() == rng_for(5, 1).random()
    assert rng_for(5, 1).random() != rng_for(5, 2).random()


def test_synthetic_sizes_and_determinism():
    a = generate_synthetic_1d(10, 15, 2, 500, seed=3)
    b = generate_synthetic_1d(10, 15, 2, 500, seed=3)
    assert len(a) == 1000 and (a.groups == 0).sum() == 500
    assert a.equals(b)
    assert not a.equals(generate_synthetic_1d(10, 15, 2, 500, seed=4))


def test_synthetic_sigma_ratio():
    ds = generate_synthetic_1d(10, 15, 4, 20_000, seed=0)
    x = ds.features[:, 0]
    assert np.std(x[ds.groups == 1]) / np.std(x[ds.groups == 0]) == pytest.approx(0.5, rel=0.03)


@pytest.mark.parametrize("kw", [dict(sigma0=0.0), dict(sigma0=1.0, n_per_group=1)])
def test_synthetic_preconditions(kw):
    with pytest.raises(ValueError):
        generate_synthetic_1d(10, 15, **kw)


def test_synthetic_label_frequency_by_decile():
    ds = generate_synthetic_1d(10, 15, 3, 50_000, seed=1)
    x, y, z = ds.features[:, 0], ds.labels, ds.groups
    p = np.empty_like(x)
    for g in (0, 1):
        m = z == g
        lo, hi = x[m].min(), x[m].max()
        p[m] = np.clip((x[m] + lo) / (hi + lo), 0, 1)
    edges = np.quantile(x, np.linspace(0, 1, 11))
    bins = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, 9)
    for b in range(10):
        m = bins == b
        assert abs(y[m].mean() - p[m].mean()) <= 0.02


def test_synthetic_feature_bias_is_likely():
    hits = sum(feature_bias_check(generate_synthetic_1d(10, 15, 1, 500, seed=s), PSI_SR).biased_against_0
               for s in range(100))
    assert hits >= 95


def test_cdf_sampling_counts():
    ds = sample_from_cdf_tables(surrogate_cdf_tables(), seed=0)
    assert (ds.groups == 0).sum() == 116_000 and (ds.groups == 1).sum() == 16_000


def test_cdf_sampling_degenerate():
    cdf = (SCORES >= 50).astype(float)
    ds = sample_from_cdf_tables(_tables(cdf, cdf), seed=1)
    assert (ds.features == 50).all()


def test_cdf_sampling_uniform_histogram():
    cdf = SCORES / 100
    ds = sample_from_cdf_tables(_tables(cdf, cdf, counts=(500_000, 500_000)), seed=2)
    freq = np.bincount(ds.features[:, 0].astype(int), minlength=101)[1:] / len(ds)
    # total variation distance to the uniform distribution
    assert 0.5 * np.abs(freq - 0.01).sum() <= 0.01


def test_cdf_sampling_preserves_marginals():
    tables = surrogate_cdf_tables((100_000, 100_000))
    ds = sample_from_cdf_tables(tables, seed=3)
    for z in (0, 1):
        x = np.sort(ds.features[ds.groups == z, 0])
        emp = np.searchsorted(x, SCORES, side="right") / x.size
        assert np.max(np.abs(emp - tables.cdf[z])) <= 0.01


def test_cdf_sampling_label_probabilities():
    tables = surrogate_cdf_tables((200_000, 200_000))
    ds = sample_from_cdf_tables(tables, seed=4)
    m = (ds.groups == 0) & (ds.features[:, 0] == 50)
    assert ds.labels[m].mean() == pytest.approx(tables.p_positive[0][49], abs=0.05)


def test_cdf_validation():
    bad = SCORES / 100
    bad[10] = 0.0
    with pytest.raises(SchemaError):
        _tables(bad, SCORES / 100)
    with pytest.raises(SchemaError):
        _tables(SCORES / 200, SCORES / 100)
    with pytest.raises(SchemaError):
        _tables(SCORES / 100, SCORES / 100, p=1.5)
    with pytest.raises(SchemaError):
        parse_cdf_tables("score,cdf\n1,1\n")


def test_cdf_parse_round_trip():
    text = "score,cdf_group0,cdf_group1,p_positive_group0,p_positive_group1\n1,0.5,0.25,0.1,0.2\n2,1,1,0.3,0.4\n"
    t = parse_cdf_tables(text, (3, 4))
    assert list(t.scores) == [1, 2] and t.counts == (3, 4)
    assert list(t.cdf[1]) == [0.25, 1.0]


def test_csv_round_trip(tmp_path):
    ds = generate_adult_like(50, seed=1)
    path = tmp_path / "d.csv"
    write_csv_dataset(ds, path)
    back = load_csv_dataset(path, FeatureSchema(ADULT_LIKE_FEATURES, ds.schema.manipulable))
    assert back.equals(ds)
    assert len(load_csv_dataset(path)) == 50


def test_csv_three_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y,z\n1,2,0,1\n3,4,1,0\n5,6,1,1\n")
    ds = load_csv_dataset(p)
    assert len(ds) == 3 and ds.schema.names == ("a", "b")


@pytest.mark.parametrize("body,needle", [
    ("a,y,z\n1,2,0\n", "row 2, column 'y'"),
    ("a,y,z\n1,0,0\nfoo,1,1\n", "row 3, column 'a'"),
    ("a,y\n1,0\n", "missing column 'z'"),
    ("a,y,z\n1,0\n", "row 2 has 2 cells"),
])
def test_csv_errors(tmp_path, body, needle):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(SchemaError, match=needle):
        load_csv_dataset(p)


def test_normalisation():
    ds = generate_adult_like(400, seed=2)
    shifted = Dataset(ds.features + 3.0, ds.labels, ds.groups, ds.schema)
    tr, te, stats = normalize_fit_apply(ds, shifted)
    assert np.allclose(tr.features.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(tr.features.std(axis=0), 1, atol=1e-12)
    std = np.array([s for _, s in stats])
    assert np.allclose(te.features, tr.features + 3.0 / std, atol=1e-12)
    assert np.array_equal(te.labels, ds.labels) and np.array_equal(te.groups, ds.groups)
    again = apply_normalization(shifted, json.loads(json.dumps(stats)))
    assert np.array_equal(again.features, te.features)
    assert tr.schema.normalization == stats


def test_normalisation_zero_variance_names_feature():
    ds = Dataset(np.array([[1.0, 2.0], [1.0, 3.0]]), [0, 1], [0, 1], FeatureSchema(("flat", "ok")))
    with pytest.raises(SchemaError, match="flat"):
        fit_normalization(ds)


def test_split_sizes_and_determinism():
    ds = generate_synthetic_1d(0, 1, 1, 5, seed=0)
    tr, te = train_test_split(ds, 0.2, seed=1)
    assert len(te) == 2 and len(tr) == 8
    tr2, te2 = train_test_split(ds, 0.2, seed=1)
    assert tr.equals(tr2) and te.equals(te2)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.floats(0, 0.9), st.integers(0, 2**32))
def test_split_is_partition(n, frac, seed):
    ds = Dataset.from_arrays(np.arange(n, dtype=float), np.zeros(n, int), np.arange(n) % 2)
    tr, te = train_test_split(ds, frac, seed=seed)
    assert len(te) == math.floor(n * frac)
    assert sorted(np.r_[tr.features[:, 0], te.features[:, 0]]) == list(range(n))


def test_adult_like_shape_and_costs():
    ds = generate_adult_like(1000, seed=0)
    assert ds.dim == 9 and len(ds) == 1000
    base = adult_cost_base()
    assert sorted(b for b in base if math.isfinite(b)) == [1.0, 10.0, 100.0]
    assert ds.schema.manipulable == tuple(math.isfinite(b) for b in base)
    assert generate_adult_like(1000, seed=0).equals(ds)
