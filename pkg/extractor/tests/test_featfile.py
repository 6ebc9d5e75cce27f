import numpy as np
import pytest

from pfx_extract import (
    BadLayout,
    BadMagic,
    BadNorm,
    BadVersion,
    read_feature_file,
    validate_file,
    write_feature_file,
)


def unit(vals):
    arr = np.asarray(vals, dtype=np.float32)
    return arr / np.linalg.norm(arr)


@pytest.fixture
def sample_path(tmp_path):
    path = tmp_path / "feats.bin"
    write_feature_file(
        path,
        [
            ("first", unit([1.0, 2.0, 3.0, 4.0]), ("a cap", "another cap")),
            ("second", unit([-1.0, 0.5, 0.25, 8.0]), ("only one",)),
        ],
    )
    return path


class TestRoundtrip:
    def test_reads_back(self, sample_path):
        records = read_feature_file(sample_path)
        assert [r[0] for r in records] == ["first", "second"]
        assert records[0][2] == ("a cap", "another cap")
        assert records[1][2] == ("only one",)
        np.testing.assert_array_equal(records[0][1], unit([1.0, 2.0, 3.0, 4.0]))

    def test_write_is_atomic(self, sample_path, tmp_path):
        assert not list(tmp_path.glob("*.tmp"))

    def test_empty_write_refused(self, tmp_path):
        with pytest.raises(BadLayout):
            write_feature_file(tmp_path / "x.bin", [])

    def test_unicode_ids_and_captions(self, tmp_path):
        path = tmp_path / "u.bin"
        write_feature_file(path, [("idé", unit([1.0, 1.0]), ("café cat",))])
        rec_id, _, caps = read_feature_file(path)[0]
        assert rec_id == "idé"
        assert caps == ("café cat",)


class TestValidate:
    def test_fresh_file_ok(self, sample_path):
        report = validate_file(sample_path)
        assert report.count == 2
        assert report.width == 4
        assert report.worst_norm_error <= 1e-5
        assert report.summary().startswith("ok: 2 records")

    def test_corrupted_magic(self, sample_path):
        blob = bytearray(sample_path.read_bytes())
        blob[0] = ord("X")
        sample_path.write_bytes(bytes(blob))
        with pytest.raises(BadMagic):
            validate_file(sample_path)

    def test_wrong_version_byte(self, sample_path):
        blob = bytearray(sample_path.read_bytes())
        blob[7] = ord("2")
        sample_path.write_bytes(bytes(blob))
        with pytest.raises(BadVersion):
            validate_file(sample_path)

    def test_truncated_file(self, sample_path):
        blob = sample_path.read_bytes()
        sample_path.write_bytes(blob[: len(blob) - 5])
        with pytest.raises(BadLayout, match="truncated"):
            validate_file(sample_path)

    def test_trailing_bytes(self, sample_path):
        sample_path.write_bytes(sample_path.read_bytes() + b"junk")
        with pytest.raises(BadLayout, match="trailing"):
            validate_file(sample_path)

    def test_unnormalized_row_caught(self, tmp_path):
        path = tmp_path / "bad.bin"
        write_feature_file(
            path,
            [
                ("good", unit([3.0, 4.0]), ("cap",)),
                ("bad", np.array([3.0, 4.0], dtype=np.float32), ("cap",)),
            ],
        )
        with pytest.raises(BadNorm, match="bad"):
            validate_file(path)

    def test_nonfinite_feature_caught(self, tmp_path):
        path = tmp_path / "nan.bin"
        write_feature_file(path, [("n", np.array([np.nan, 1.0], dtype=np.float32), ("cap",))])
        with pytest.raises(BadNorm, match="non-finite"):
            validate_file(path)
