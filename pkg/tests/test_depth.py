from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsci.core import FunctionSample, Grid, GridKind
from lsci.depth import (
    DepthKind,
    InfinityMass,
    LocalMeasure,
    depth_at_atoms,
    depth_at_points,
    phi_depth,
    univariate_depth,
)
from lsci.exceptions import EmptyMeasure
from lsci.projections import ProjectionFamily, ProjectionKind, build_random

from oracles import tukey_by_enumeration


@st.composite
def small_measures(draw):
    n = draw(st.integers(1, 6))
    atoms = draw(st.lists(st.integers(-4, 4), min_size=n, max_size=n))
    counts = draw(st.lists(st.integers(0, 8), min_size=n, max_size=n))
    inf_count = draw(st.integers(0, 8))
    if sum(counts) == 0:
        counts[0] = 1
    total = sum(counts) + inf_count
    # a power-of-two denominator keeps the float sums exact
    denom = 1 << max(1, (total - 1).bit_length())
    pad = denom - total
    inf_count += pad
    return sorted(zip(atoms, counts)), inf_count, denom


@settings(max_examples=300, deadline=None)
@given(m=small_measures(), x=st.integers(-5, 5), split=st.booleans())
def test_tukey_matches_enumeration(m, x, split):
    pairs, inf_count, denom = m
    atoms = [a for a, _ in pairs]
    masses = [Fraction(c, denom) for _, c in pairs]
    inf = Fraction(inf_count, denom)
    want = tukey_by_enumeration(Fraction(x), atoms, masses, inf, split)
    meas = LocalMeasure(atoms, [float(w) for w in masses], float(inf))
    kind_inf = InfinityMass.SPLIT if split else InfinityMass.UPPER
    assert univariate_depth(float(x), meas, DepthKind.TUKEY, kind_inf) == float(want)
    at_atoms = depth_at_atoms(np.array(atoms, float), np.array([float(w) for w in masses]),
                              np.float64(inf), DepthKind.TUKEY, kind_inf)
    for a, d in zip(atoms, at_atoms):
        assert d == float(tukey_by_enumeration(Fraction(a), atoms, masses, inf, split))


def test_tukey_examples():
    m = LocalMeasure([1.0, 2.0, 3.0], [1 / 3, 1 / 3, 1 / 3], 0.0)
    assert univariate_depth(2.0, m) == pytest.approx(2 / 3)
    assert univariate_depth(0.0, m) == 0.0
    half = LocalMeasure([0.0], [0.5], 0.5)
    assert univariate_depth(0.0, half) == pytest.approx(0.5)
    assert univariate_depth(1.0, half) == pytest.approx(0.5)


def test_mahalanobis_and_norminf_peak_at_centre():
    m = LocalMeasure([-1.0, 0.0, 1.0], [1 / 3] * 3, 0.0)
    assert univariate_depth(0.0, m, DepthKind.MAHALANOBIS) == 1.0
    assert univariate_depth(0.0, m, DepthKind.NORM_INF) == 1.0
    assert univariate_depth(2.0, m, DepthKind.NORM_INF) == pytest.approx(1 / 3)


def test_measure_validation():
    with pytest.raises(ValueError):
        LocalMeasure([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        LocalMeasure([1.0, 0.0], [0.5, 0.5])
    m = LocalMeasure.from_atoms([3.0, 1.0], [0.25, 0.75])
    np.testing.assert_array_equal(m.locations, [1.0, 3.0])
    np.testing.assert_array_equal(m.weights, [0.75, 0.25])


def test_empty_measure_raises():
    with pytest.raises(EmptyMeasure):
        depth_at_points(np.empty(0), np.empty(0), np.float64(1.0), np.zeros(1), DepthKind.MAHALANOBIS)


def _axis_family():
    grid = Grid(GridKind.INTERVAL_1D, [0.25, 0.75], [0.5, 0.5])
    d = np.array([[np.sqrt(2.0), 0.0], [0.0, np.sqrt(2.0)], [1.0, 1.0]])
    return grid, ProjectionFamily(grid, d, ProjectionKind.RAND)


def test_phi_depth_single_projection():
    grid = Grid.interval(4)
    fam = ProjectionFamily(grid, np.ones((1, 4)), ProjectionKind.RAND)
    m = LocalMeasure([-1.0, 0.0, 1.0], [0.25, 0.25, 0.25], 0.25)
    r = FunctionSample(grid, np.full(4, 0.5))
    assert phi_depth(r, fam, [m]) == univariate_depth(0.5, m)


def test_phi_depth_is_the_minimum():
    grid, fam = _axis_family()
    r = FunctionSample(grid, [0.0, 0.0])
    # projections of r are all 0; choose measures whose depth at 0 is 0.4, 0.2, 0.5
    ms = [
        LocalMeasure([-1.0, 1.0], [0.4, 0.6], 0.0),
        LocalMeasure([-1.0, 1.0], [0.2, 0.8], 0.0),
        LocalMeasure([-1.0, 1.0], [0.5, 0.5], 0.0),
    ]
    assert phi_depth(r, fam, ms) == pytest.approx(0.2)


def test_phi_depth_far_outlier_is_zero(grid64):
    fam = build_random(grid64, 5, seed=0)
    ms = [LocalMeasure([-1.0, 1.0], [0.5, 0.5], 0.0)] * 5
    r = FunctionSample(grid64, np.full(64, 1e6))
    assert phi_depth(r, fam, ms) == 0.0


def test_exclude_self_removes_own_atom():
    vals = np.array([[-1.0, 0.0, 2.0, 5.0]])
    w = np.array([[0.25, 0.25, 0.125, 0.125]])
    inf = np.array([0.25])
    plain = depth_at_atoms(vals, w, inf, DepthKind.TUKEY)
    excl = depth_at_atoms(vals, w, inf, DepthKind.TUKEY, exclude_self=True)
    np.testing.assert_array_equal(excl, np.maximum(plain - w, 0.0))


def test_near_ties_resolve_like_exact_ties():
    vals = np.array([[-1.0, 0.5, 2.0]])
    w = np.array([[0.3, 0.3, 0.3]])
    inf = np.array([0.1])
    exact = depth_at_points(vals, w, inf, np.array([0.5]), DepthKind.TUKEY)
    nudged = depth_at_points(vals, w, inf, np.array([np.nextafter(0.5, 1.0)]), DepthKind.TUKEY)
    assert exact[0, 0] == nudged[0, 0]


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 30))
def test_batched_atoms_match_points(seed, n):
    r = np.random.default_rng(seed)
    vals = np.sort(np.round(r.standard_normal((3, n)), 1), axis=-1)
    w = r.uniform(size=(3, n))
    w /= w.sum(axis=-1, keepdims=True) * 1.25
    inf = np.full(3, 0.2)
    for kind in DepthKind:
        a = depth_at_atoms(vals, w, inf, kind)
        p = depth_at_points(vals, w, inf, vals, kind)
        np.testing.assert_array_equal(a, p)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_depths_lie_in_unit_interval(seed):
    r = np.random.default_rng(seed)
    vals = np.sort(r.standard_normal(10))
    w = r.dirichlet(np.ones(11))
    x = r.standard_normal(20) * 3
    for kind in DepthKind:
        d = depth_at_points(vals, w[:10], np.float64(w[10]), x, kind)
        assert np.all((d >= 0) & (d <= 1))
