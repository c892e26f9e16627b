import numpy as np
import pytest

from aembench.autodiff import checkpoint
from aembench.errors import CheckpointError, MissingArtifactError


class TestCheckpoint:
    def test_exact_roundtrip(self, tmp_path, rng):
        tensors = {
            "W0": rng.normal(size=(3, 4)),
            "b0": np.array([1e-300, -0.1, np.pi, 2.0**60]),
            "scalar": np.array(1.0 / 3.0),
            "perm": np.array([2, 0, 1]),
        }
        path = checkpoint.save(tmp_path / "net.ibchk", tensors)
        loaded = checkpoint.load(path)
        assert list(loaded) == list(tensors)
        for k, v in tensors.items():
            assert loaded[k].shape == v.shape
            np.testing.assert_array_equal(loaded[k], v)

    def test_layout(self):
        text = checkpoint.dumps({"w": np.array([[1.0, 2.0]])})
        assert text.splitlines() == ["IBCHK v1", "tensor w 2 1 2", "1 2", "end"]

    def test_unknown_magic(self):
        with pytest.raises(CheckpointError, match="magic"):
            checkpoint.loads("IBCHK v2\ntensor w 1 1\n1\nend\n")

    def test_value_count_mismatch(self):
        with pytest.raises(CheckpointError, match="expected 3 values"):
            checkpoint.loads("IBCHK v1\ntensor w 1 3\n1 2\nend\n")

    def test_rank_mismatch(self):
        with pytest.raises(CheckpointError):
            checkpoint.loads("IBCHK v1\ntensor w 2 3\n1 2 3\nend\n")

    def test_missing_end(self):
        with pytest.raises(CheckpointError, match="end"):
            checkpoint.loads("IBCHK v1\ntensor w 1 1\n1\n")

    def test_name_with_space(self):
        with pytest.raises(CheckpointError):
            checkpoint.dumps({"a b": np.zeros(1)})

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            checkpoint.load(tmp_path / "absent.ibchk")
