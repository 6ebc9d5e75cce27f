import numpy as np
import pytest
import torch

from pfxdiff.checkpoint import MAGIC, read_checkpoint, write_checkpoint
from pfxdiff.errors import BadMagic, BadVersion, TruncatedFile


@pytest.fixture
def sample_tensors():
    gen = torch.Generator().manual_seed(44)
    return {
        "embedding.matrix": torch.randn(12, 8, generator=gen),
        "model.up_proj.weight": torch.randn(16, 8, generator=gen),
        "model.scalar": torch.tensor(3.5),
        "model.bias": torch.randn(16, generator=gen),
    }


class TestRoundtrip:
    def test_exact_values_shapes_and_order(self, tmp_path, sample_tensors):
        path = tmp_path / "model.ckpt"
        write_checkpoint(path, sample_tensors, {"step": 7, "note": "x"})
        tensors, metadata = read_checkpoint(path)
        assert list(tensors) == list(sample_tensors)
        for name, original in sample_tensors.items():
            np.testing.assert_array_equal(tensors[name], original.numpy())
            assert tensors[name].dtype == np.float32
        assert metadata == {"step": 7, "note": "x"}

    def test_rank_zero_tensor(self, tmp_path):
        path = tmp_path / "s.ckpt"
        write_checkpoint(path, {"x": torch.tensor(2.25)}, {})
        tensors, _ = read_checkpoint(path)
        assert tensors["x"].shape == ()
        assert tensors["x"] == np.float32(2.25)

    def test_numpy_input_accepted(self, tmp_path):
        path = tmp_path / "n.ckpt"
        write_checkpoint(path, {"a": np.arange(6, dtype=np.float64).reshape(2, 3)}, {})
        tensors, _ = read_checkpoint(path)
        np.testing.assert_array_equal(tensors["a"], np.arange(6, dtype=np.float32).reshape(2, 3))

    def test_nested_metadata(self, tmp_path):
        path = tmp_path / "m.ckpt"
        metadata = {"cfg": {"dims": [4, 8], "name": "tiny"}, "flag": True}
        write_checkpoint(path, {"w": torch.zeros(2)}, metadata)
        _, got = read_checkpoint(path)
        assert got == metadata


class TestDeterminism:
    def test_two_writes_byte_identical(self, tmp_path, sample_tensors):
        a = tmp_path / "a.ckpt"
        b = tmp_path / "b.ckpt"
        metadata = {"z": 1, "a": 2, "m": {"y": 0, "x": 1}}
        write_checkpoint(a, sample_tensors, metadata)
        write_checkpoint(b, sample_tensors, metadata)
        assert a.read_bytes() == b.read_bytes()

    def test_no_leftover_temp_file(self, tmp_path, sample_tensors):
        path = tmp_path / "c.ckpt"
        write_checkpoint(path, sample_tensors, {})
        assert [p.name for p in tmp_path.iterdir()] == ["c.ckpt"]


class TestErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(BadMagic):
            read_checkpoint(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "v2.ckpt"
        path.write_bytes(b"PFXCKPT2" + b"\x00" * 16)
        with pytest.raises(BadVersion):
            read_checkpoint(path)

    def test_truncation_reports_offset(self, tmp_path, sample_tensors):
        path = tmp_path / "t.ckpt"
        write_checkpoint(path, sample_tensors, {"step": 1})
        blob = path.read_bytes()
        cut = len(blob) // 2
        path.write_bytes(blob[:cut])
        with pytest.raises(TruncatedFile) as info:
            read_checkpoint(path)
        assert info.value.offset is not None
        assert info.value.offset <= cut
        assert "offset" in str(info.value)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.ckpt"
        path.write_bytes(b"")
        with pytest.raises(TruncatedFile):
            read_checkpoint(path)

    def test_magic_shorter_than_header(self, tmp_path):
        path = tmp_path / "short.ckpt"
        path.write_bytes(MAGIC[:4])
        with pytest.raises(TruncatedFile):
            read_checkpoint(path)
