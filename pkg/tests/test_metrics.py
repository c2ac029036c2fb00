import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsci.core import FunctionSample, FunctionSet, Grid
from lsci.eval.metrics import distance_correlation, marginal_coverage, risk, width
from lsci.sampler import PredictionBand

from oracles import dcor_double_sum


@pytest.mark.parametrize("seed", range(4))
def test_dcor_matches_double_sum(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal(50)
    y = x**2 + 0.5 * r.standard_normal(50)
    assert abs(distance_correlation(x, y) - dcor_double_sum(list(x), list(y))) < 1e-10


def test_dcor_examples():
    x = np.random.default_rng(0).standard_normal(100)
    assert distance_correlation(x, x) == pytest.approx(1.0)
    assert distance_correlation(x, -3 * x + 7) == pytest.approx(1.0)
    r = np.random.default_rng(1)
    assert distance_correlation(r.standard_normal(500), r.standard_normal(500)) < 0.1
    assert distance_correlation(x, np.full(100, 2.0)) == 0.0
    with pytest.raises(ValueError):
        distance_correlation([1, 2, 3], [1, 2, 3])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 40))
def test_dcor_bounds_and_symmetry(seed, n):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(n), r.standard_normal(n)
    d = distance_correlation(x, y)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(distance_correlation(y, x), abs=1e-12)


def band(grid, lo, hi):
    return PredictionBand(FunctionSample(grid, np.broadcast_to(lo, grid.size).copy()),
                          FunctionSample(grid, np.broadcast_to(hi, grid.size).copy()))


def test_risk_examples():
    grid = Grid.interval(200)
    targets = FunctionSet(grid, np.zeros((2, 200)))
    assert risk([band(grid, -1, 1)] * 2, targets) == 1.0
    assert risk([band(grid, 1, 2)] * 2, targets) == 0.0
    one = np.zeros((1, 200))
    one[0, 0] = 5.0  # 99.5% of the domain inside
    assert risk([band(grid, -1, 1)], FunctionSet(grid, one), delta=0.01) == 1.0
    assert risk([band(grid, -1, 1)], FunctionSet(grid, one), delta=0.0) == 0.0


def test_width_examples():
    g3 = Grid.interval(3)
    assert width(band(g3, 0.0, 0.0)) == 0.0
    assert width(band(g3, -0.5, 1.5)) == 2.0
    b = PredictionBand(FunctionSample(g3, [0.0, 0.0, 0.0]), FunctionSample(g3, [1.0, 2.0, 9.0]))
    assert width(b) == 2.0


def test_marginal_coverage():
    assert marginal_coverage([True, False, True, True]) == 0.75
