import numpy as np
import pytest

from burdengap.domain import Dataset, FeatureSchema


def make_1d(x0, x1, y0=None, y1=None) -> Dataset:
    """One-feature dataset from per-group score lists (labels default to 1)."""
    x0, x1 = list(x0), list(x1)
    y0 = [1] * len(x0) if y0 is None else list(y0)
    y1 = [1] * len(x1) if y1 is None else list(y1)
    return Dataset(np.array(x0 + x1, dtype=float).reshape(-1, 1), y0 + y1,
                   [0] * len(x0) + [1] * len(x1), FeatureSchema(("score",)))


@pytest.fixture
def toy():
    # group 0 {1, 3}, group 1 {2, 4}
    return make_1d([1, 3], [2, 4])
