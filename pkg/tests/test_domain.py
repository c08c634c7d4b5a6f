import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from burdengap.domain import (
    PSI_SR,
    PSI_TPR,
    CostModel1D,
    Dataset,
    FeatureSchema,
    LinearClassifier,
    LinearCostMultiD,
    NumericalError,
    QuadraticCostMultiD,
    Sample,
    SchemaError,
    SubPopCondition,
    ThresholdClassifier,
    classifier_from_dict,
    classify,
    cost_from_dict,
    dumps_classifier,
    evaluate_psi,
    loads_classifier,
)


def test_classify_threshold_boundary_is_positive():
    f = ThresholdClassifier(3, 3)
    assert classify(f, Sample((3.0,), 0, 0)) == 1
    assert classify(f, Sample((2.0,), 0, 1)) == 0


def test_classify_linear_on_boundary():
    f = LinearClassifier([1, 2], 5, 5)
    assert classify(f, Sample((1.0, 2.0), 1, 0)) == 1


def test_classify_dimension_mismatch():
    with pytest.raises(SchemaError):
        classify(LinearClassifier([1, 2], 0, 0), Sample((1.0,), 0, 0))


def test_evaluate_psi():
    assert evaluate_psi(PSI_SR, Sample((7.0,), 0, 0)) == 1
    assert evaluate_psi(PSI_TPR, Sample((7.0,), 0, 0)) == 0
    assert evaluate_psi(PSI_TPR, Sample((7.0,), 1, 0)) == 1


def test_psi_parse_aliases():
    assert SubPopCondition.parse("SR") is PSI_SR
    assert SubPopCondition.parse("tpr") is PSI_TPR
    with pytest.raises(ValueError):
        SubPopCondition.parse("fpr")


@pytest.mark.parametrize("label,group", [(2, 0), (0, -1)])
def test_sample_rejects_non_binary(label, group):
    with pytest.raises(SchemaError):
        Sample((1.0,), label, group)


def test_dataset_validation():
    with pytest.raises(SchemaError):
        Dataset(np.zeros((2, 2)), [0, 1], [0, 1], FeatureSchema(("a",)))
    with pytest.raises(SchemaError):
        Dataset(np.zeros((2, 1)), [0, 3], [0, 1], FeatureSchema(("a",)))
    with pytest.raises(SchemaError):
        Dataset(np.array([[np.nan], [1.0]]), [0, 1], [0, 1], FeatureSchema(("a",)))
    with pytest.raises(SchemaError):
        FeatureSchema(("a", "b"), normalization=((0.0, 1.0), (0.0, 0.0)))
    with pytest.raises(SchemaError):
        FeatureSchema(("a", "a"))


def test_dataset_is_immutable_and_iterable():
    ds = Dataset.from_arrays([[1.0], [2.0]], [0, 1], [1, 0])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 5.0
    samples = ds.samples
    assert samples[0] == Sample((1.0,), 0, 1)
    assert Dataset.from_samples(samples, ds.schema).equals(ds)


def test_classifier_json_round_trip_bit_exact():
    f = LinearClassifier([0.1, 1 / 3, -2.5e-17], math.pi, -1e300)
    g = loads_classifier(dumps_classifier(f, {"note": "x"}))
    assert g == f
    t = ThresholdClassifier(0.1 + 0.2, 7)
    assert loads_classifier(dumps_classifier(t)) == t


def test_classifier_json_missing_field():
    with pytest.raises(SchemaError, match="v1"):
        classifier_from_dict({"kind": "linear", "u": [1.0], "v0": 0.0})
    with pytest.raises(SchemaError):
        loads_classifier("{not json")
    with pytest.raises(SchemaError):
        classifier_from_dict({"kind": "tree"})


def test_cost_model_1d():
    c = CostModel1D.linear(2.0, 1.0)
    assert c.d(0, 1.0, 3.0) == 4.0
    assert c.cost(1, 3.0, 1.0) == 0.0
    q = CostModel1D.quadratic()
    assert q.d(0, 2.0, 3.0) == 5.0
    assert q.d(1, 4.0, 4.0) == 0.0
    with pytest.raises(ValueError):
        CostModel1D.linear(0.0, 1.0)
    with pytest.raises(ValueError):
        CostModel1D("cubic")


def test_linear_cost_multid():
    c = LinearCostMultiD([1.0, math.inf], [2.0, 3.0])
    assert c.manipulable == (True, True)
    assert c.cost(0, [0, 0], [2, 0]) == 2.0
    assert c.cost(0, [0, 0], [0, 1]) == math.inf
    assert c.cost(1, [0, 0], [1, 1]) == 5.0
    assert c.cost(1, [1, 1], [0, 0]) == 0.0
    with pytest.raises(ValueError):
        LinearCostMultiD([math.inf], [1.0])
    with pytest.raises(ValueError):
        LinearCostMultiD([0.0], [1.0])
    s = LinearCostMultiD.scaled([100, 10, math.inf], 2.0)
    assert list(s.d0[:2]) == [200, 20] and list(s.d1[:2]) == [100, 10]


def test_quadratic_cost_validation():
    q = QuadraticCostMultiD(np.eye(2))
    assert q.cost(0, [0, 0], [1, 1]) == 2.0
    with pytest.raises(NumericalError):
        QuadraticCostMultiD(np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(NumericalError):
        QuadraticCostMultiD(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(NumericalError):
        QuadraticCostMultiD(np.diag([1.0, 1e-14]))


def test_cost_from_dict_round_trip():
    c = LinearCostMultiD([1.0, math.inf], [2.0, 3.0])
    back = cost_from_dict(json.loads(json.dumps(c.to_dict())))
    assert np.array_equal(back.d0, c.d0) and np.array_equal(back.d1, c.d1)
    q = cost_from_dict({"kind": "quadratic_multi", "B": [[2.0, 0.0], [0.0, 1.0]]})
    assert q.B[0, 0] == 2.0
    assert cost_from_dict({"kind": "linear", "scale": [1, 2]}).scale == (1.0, 2.0)
    with pytest.raises(SchemaError):
        cost_from_dict({"kind": "?"})


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0, 50), st.integers(0, 1))
def test_threshold_classify_monotone_in_x(x, tau, dx, z):
    f = ThresholdClassifier(tau, tau)
    assert classify(f, Sample((x,), 0, z)) <= classify(f, Sample((x + dx,), 0, z))


@given(st.lists(st.floats(0, 10), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(0, 5), min_size=3, max_size=3), st.floats(-20, 20))
def test_linear_classify_monotone_under_increase(u, x, dx, v):
    f = LinearClassifier(u, v, v)
    x2 = tuple(a + b for a, b in zip(x, dx))
    assert classify(f, Sample(tuple(x), 0, 0)) <= classify(f, Sample(x2, 0, 0))
