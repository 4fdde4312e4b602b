import numpy as np
import pytest
from numpy.testing import assert_array_equal

from models.phase import GridLayout, GridSpec
from storage.checkpoints import HEADER_SIZE, CheckpointStore


def test_save_and_load(tmp_path, small_grid, weights, rng):
    store = CheckpointStore(tmp_path)
    values = rng.standard_normal(small_grid.size)
    path = store.save("run/slice_0.bin", small_grid, values, weights, label="t=0")
    assert path == tmp_path / "run" / "slice_0.bin"
    assert path.stat().st_size == HEADER_SIZE + 8 * small_grid.size
    loaded = store.load("run/slice_0.bin")
    assert loaded.grid == small_grid
    assert loaded.weights == weights
    assert loaded.label == "t=0"
    assert_array_equal(loaded.values, values)


def test_cell_centered_layout_survives(tmp_path):
    grid = GridSpec(x_max=2.0, v_max=3.0, n_x=2, n_v=2, layout=GridLayout.CELL_CENTERED)
    store = CheckpointStore(tmp_path)
    store.save("cells.bin", grid, np.arange(grid.size, dtype=float))
    loaded = store.load("cells.bin")
    assert loaded.grid.layout == GridLayout.CELL_CENTERED
    assert loaded.weights is None


def test_size_mismatch_is_rejected(tmp_path, small_grid):
    with pytest.raises(ValueError):
        CheckpointStore(tmp_path).save("bad.bin", small_grid, np.zeros(small_grid.size - 1))


def test_truncated_file_is_rejected(tmp_path, small_grid):
    store = CheckpointStore(tmp_path)
    path = store.save("slice.bin", small_grid, np.ones(small_grid.size))
    raw = path.read_bytes()
    path.write_bytes(raw[: HEADER_SIZE - 4])
    with pytest.raises(ValueError):
        store.load(path)
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        store.load(path)
