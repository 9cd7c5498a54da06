import numpy as np
import pytest

from mocaptk.errors import ChecksumMismatch
from mocaptk.nn import checkpoint


def test_round_trip(tmp_path, rng):
    arrays = {
        "enc/0/w": rng.standard_normal((4, 3)),
        "enc/0/b": rng.standard_normal(4),
        "step": np.array(7.0),
    }
    path = tmp_path / "model.ckpt"
    checkpoint.save_arrays(path, arrays, config_hash="abc123")
    loaded, h = checkpoint.load_arrays(path)
    assert h == "abc123"
    assert set(loaded) == set(arrays)
    for k, v in arrays.items():
        np.testing.assert_array_equal(loaded[k], v)


def test_hash_mismatch(tmp_path):
    path = tmp_path / "model.ckpt"
    checkpoint.save_arrays(path, {"x": np.zeros(2)}, config_hash="aaaa")
    with pytest.raises(ChecksumMismatch):
        checkpoint.load_arrays(path, expected_hash="bbbb")


def test_bytes_deterministic(tmp_path, rng):
    arrays = {"w": rng.standard_normal((3, 3))}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    checkpoint.save_arrays(p1, arrays, "h")
    checkpoint.save_arrays(p2, arrays, "h")
    assert p1.read_bytes() == p2.read_bytes()
