import json

import numpy as np

from lsci.core import FunctionSet, Grid
from lsci.io import dump_json, read_function_set, read_grid, read_matrix_csv, write_function_set, write_grid, write_matrix_csv


def test_function_set_roundtrip_is_exact(tmp_path, rng):
    g = Grid.interval(16)
    fs = FunctionSet(g, rng.standard_normal((5, 16)), np.linspace(-1, 1, 5))
    write_function_set(fs, tmp_path / "f.csv")
    back = read_function_set(tmp_path / "f.csv", g)
    np.testing.assert_array_equal(back.values, fs.values)
    np.testing.assert_array_equal(back.index_labels, fs.index_labels)


def test_matrix_and_grid_roundtrip(tmp_path, rng):
    m = rng.standard_normal((4, 3)) * 1e-7
    write_matrix_csv(m, tmp_path / "m.csv")
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv"), m)
    g = Grid.latlon(4, 8)
    write_grid(g, tmp_path / "g.json")
    assert read_grid(tmp_path / "g.json") == g


def test_dump_json_is_stable(tmp_path):
    dump_json({"b": 1, "a": np.float64(0.5), "c": np.arange(2)}, tmp_path / "x.json")
    text = (tmp_path / "x.json").read_text(encoding="utf-8")
    assert json.loads(text) == {"a": 0.5, "b": 1, "c": [0, 1]}
    assert text.index('"a"') < text.index('"b"')
