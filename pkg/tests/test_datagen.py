import numpy as np
import pytest

from lsci.core import Grid
from lsci.datagen import (
    Task,
    convolve_taps,
    gen_ar1d,
    gen_ar_sphere2d,
    gen_gp_noise_1d,
    gen_reg1d,
    generate,
    gp_noise_sphere,
    load_dataset,
    mean_function,
    save_dataset,
    sigma_t,
)


def test_noise_deterministic(grid64):
    a, b = gen_gp_noise_1d(grid64, 3), gen_gp_noise_1d(grid64, 3)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, gen_gp_noise_1d(grid64, 4).values)


def test_noise_variance(grid64):
    from lsci.datagen import gp_noise_1d
    v = gp_noise_1d(grid64, 20000, np.random.default_rng(0))
    # pointwise variance is sum_k b_k(x)^2 / k, averaging sum 1/k over the grid
    want = 1.0 + sum(1.0 / k for k in range(2, 22))
    assert np.mean(v.var(axis=0)) == pytest.approx(want, rel=0.03)


def test_reg1d_sizes_and_mean(grid64):
    ds = gen_reg1d(seed=0)
    assert (len(ds.train), len(ds.cal), len(ds.test)) == (1000, 1000, 1000)
    np.testing.assert_array_equal(mean_function([0.0], grid64), 0.0)
    np.testing.assert_allclose(ds.test.sigma, sigma_t(ds.test.t))
    assert ds.true_sigma.shape == (3000,)
    assert np.all(ds.test.t >= -2 * np.pi) and np.all(ds.test.t <= 2 * np.pi)


def test_zero_sum_taps_kill_constants():
    out = convolve_taps(np.full((1, 16), 3.0))
    np.testing.assert_array_equal(out[0, 2:-2], 0.0)


def test_reg1d_heteroskedastic():
    ds = gen_reg1d(300, 300, 300, seed=1)
    resid = ds.test.g.values - convolve_taps(ds.test.f.values)
    spread = resid.std(axis=1)
    assert np.corrcoef(spread, ds.test.sigma)[0, 1] > 0.8


def test_ar1d_pairs_are_lagged():
    ds = gen_ar1d(101, seed=2)
    np.testing.assert_array_equal(ds.cal.f.values[1:], ds.cal.g.values[:-1])
    assert len(ds.cal) == 100


def test_sphere_fields_smooth_and_scaled():
    grid = Grid.latlon(32, 64)
    v = gp_noise_sphere(grid, 200, np.random.default_rng(0))
    assert np.mean(v.var(axis=0) @ grid.cell_weights) == pytest.approx(1.0, rel=0.15)
    fields = v.reshape(200, 32, 64)
    # neighbouring cells are strongly correlated (smooth fields)
    a, b = fields[:, 16, :-1].ravel(), fields[:, 16, 1:].ravel()
    assert np.corrcoef(a, b)[0, 1] > 0.9
    # periodic in longitude
    assert np.corrcoef(fields[:, 16, 0], fields[:, 16, -1])[0, 1] > 0.9


def test_sphere_task_shapes():
    ds = gen_ar_sphere2d(21, seed=0)
    assert ds.grid.shape == (32, 64)
    assert ds.cal.g.values.shape == (20, 2048)


def test_generate_dispatch():
    assert generate("AR1D", 0, 50, 50, 50).task is Task.AR1D
    with pytest.raises(ValueError):
        generate("AR1D", 0, 10, 20, 30)
    with pytest.raises(ValueError):
        generate("Nope")


def test_save_load_roundtrip(tmp_path):
    ds = gen_reg1d(20, 15, 10, seed=5)
    save_dataset(ds, tmp_path / "a", seed=5)
    save_dataset(gen_reg1d(20, 15, 10, seed=5), tmp_path / "b", seed=5)
    for name in ("cal_f.csv", "test_g.csv", "true_sigma.csv", "meta.json", "grid.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    back = load_dataset(tmp_path / "a")
    np.testing.assert_array_equal(back.cal.g.values, ds.cal.g.values)
    np.testing.assert_array_equal(back.test.t, ds.test.t)
    np.testing.assert_array_equal(back.true_sigma, ds.true_sigma)
