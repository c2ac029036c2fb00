import numpy as np
import pytest

from lsci.core import FunctionSample, FunctionSet, Grid, GridKind, add, inner, l2_norm, subtract, sup_norm
from lsci.exceptions import GridMismatch, ShapeMismatch


def two_point_grid():
    return Grid(GridKind.INTERVAL_1D, [0.25, 0.75], [0.5, 0.5])


def test_interval_weights_sum_to_one():
    g = Grid.interval(64)
    assert g.size == 64
    assert g.measure == pytest.approx(1.0)


def test_latlon_shape_and_weights():
    g = Grid.latlon(32, 64)
    assert g.shape == (32, 64) and g.size == 2048
    assert g.cell_weights.sum() == pytest.approx(1.0)
    # polar rows carry less area than equatorial ones
    assert g.cell_weights[0] < g.cell_weights[16 * 64]


def test_l2_norm_examples(grid64):
    assert l2_norm(FunctionSample(grid64, np.ones(64))) == pytest.approx(1.0)
    assert l2_norm(FunctionSample(grid64, np.zeros(64))) == 0.0
    assert l2_norm(FunctionSample(two_point_grid(), [3.0, 4.0])) == pytest.approx(np.sqrt(12.5))


def test_sup_norm_examples():
    g3 = Grid.interval(3)
    assert sup_norm(FunctionSample(g3, [-2.0, 1.0, 0.0])) == 2.0
    assert sup_norm(FunctionSample(g3, np.zeros(3))) == 0.0
    assert sup_norm(FunctionSample(two_point_grid(), [0.3, -0.7])) == 0.7


def test_subtract_and_add():
    g = two_point_grid()
    a, b = FunctionSample(g, [1.0, 2.0]), FunctionSample(g, [0.0, 1.0])
    np.testing.assert_array_equal(subtract(a, b).values, [1.0, 1.0])
    np.testing.assert_array_equal(subtract(a, a).values, [0.0, 0.0])
    np.testing.assert_array_equal(add(subtract(a, b), b).values, a.values)
    assert inner(a, b) == pytest.approx(1.0)


def test_grid_mismatch():
    a = FunctionSample(Grid.interval(64), np.zeros(64))
    b = FunctionSample(Grid.interval(65), np.zeros(65))
    with pytest.raises(GridMismatch):
        subtract(a, b)


def test_value_length_checked():
    with pytest.raises(ShapeMismatch):
        FunctionSample(Grid.interval(4), np.zeros(5))
    with pytest.raises(ShapeMismatch):
        FunctionSet(Grid.interval(4), np.zeros((3, 5)))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(GridKind.INTERVAL_1D, [0.5, 0.2], [0.5, 0.5])
    with pytest.raises(ValueError):
        Grid(GridKind.INTERVAL_1D, [0.2, 0.5], [0.5, 0.0])


def test_grid_roundtrip_dict():
    for g in (Grid.interval(16), Grid.latlon(4, 8)):
        assert Grid.from_dict(g.to_dict()) == g


def test_functionset_indexing(grid64):
    fs = FunctionSet(grid64, np.arange(3 * 64, dtype=float).reshape(3, 64))
    assert isinstance(fs[1], FunctionSample)
    np.testing.assert_array_equal(fs[1].values, np.arange(64, 128))
    assert len(fs[1:]) == 2
