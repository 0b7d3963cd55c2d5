"""File-format tests: JSON-header raw volumes, feature matrices, labels."""

import json

import numpy as np
import pytest

from geoal import io
from geoal.volume import SupervoxelMap, Volume, VolumeError, grid_oversegment


class TestVolumeRoundTrip:
    def test_f32(self, tmp_path):
        rng = np.random.default_rng(0)
        vol = Volume(rng.normal(size=(5, 4, 3)).astype(np.float32))
        io.write_volume(tmp_path / "v.json", vol)
        back = io.read_volume(tmp_path / "v.json")
        np.testing.assert_array_equal(back.voxels, vol.voxels)

    def test_u8(self, tmp_path):
        vol = Volume(np.arange(24, dtype=np.uint8).reshape(2, 3, 4))
        io.write_volume(tmp_path / "v.json", vol)
        back = io.read_volume(tmp_path / "v.json")
        np.testing.assert_array_equal(back.voxels, vol.voxels)
        assert json.loads((tmp_path / "v.json").read_text())["dtype"] == "u8"

    def test_x_fastest_on_disk(self, tmp_path):
        # voxel value equals its x index: first bytes on disk step through x
        xs = np.arange(4, dtype=np.uint8)
        vol = Volume(np.broadcast_to(xs[:, None, None], (4, 2, 2)).copy())
        io.write_volume(tmp_path / "v.json", vol)
        raw = (tmp_path / "v.raw").read_bytes()
        assert list(raw[:4]) == [0, 1, 2, 3]

    def test_little_endian_f32(self, tmp_path):
        vol = Volume(np.full((1, 1, 1), 1.0, dtype=np.float32))
        io.write_volume(tmp_path / "v.json", vol)
        raw = (tmp_path / "v.raw").read_bytes()
        assert raw == np.array(1.0, dtype="<f4").tobytes()

    def test_size_mismatch_detected(self, tmp_path):
        vol = Volume(np.zeros((2, 2, 2), dtype=np.float32))
        io.write_volume(tmp_path / "v.json", vol)
        (tmp_path / "v.raw").write_bytes(b"\x00" * 4)
        with pytest.raises(VolumeError):
            io.read_volume(tmp_path / "v.json")

    def test_unknown_dtype(self, tmp_path):
        (tmp_path / "v.json").write_text(
            json.dumps({"dims": [1, 1, 1], "dtype": "f64", "data": "v.raw"})
        )
        (tmp_path / "v.raw").write_bytes(b"\x00" * 8)
        with pytest.raises(VolumeError):
            io.read_volume(tmp_path / "v.json")


class TestSvmapRoundTrip:
    def test_round_trip(self, tmp_path):
        svmap = grid_oversegment(Volume(np.zeros((6, 4, 4))), 2)
        io.write_svmap(tmp_path / "s.json", svmap)
        back = io.read_svmap(tmp_path / "s.json")
        np.testing.assert_array_equal(back.ids, svmap.ids)

    def test_connectivity_check(self, tmp_path):
        ids = np.zeros((5, 1, 1), dtype=np.int64)
        ids[0] = 1
        ids[4] = 1  # id 1 split into two components
        io.write_svmap(tmp_path / "s.json", SupervoxelMap(ids))
        with pytest.raises(VolumeError, match="disconnected"):
            io.read_svmap(tmp_path / "s.json", check_connectivity=True)


class TestFeaturesAndLabels:
    def test_features_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        feats = rng.normal(size=(7, 5)).astype(np.float32)
        io.write_features(tmp_path / "f.json", feats)
        back = io.read_features(tmp_path / "f.json")
        np.testing.assert_allclose(back, feats, atol=0)

    def test_features_header(self, tmp_path):
        io.write_features(tmp_path / "f.json", np.zeros((3, 5)))
        header = json.loads((tmp_path / "f.json").read_text())
        assert header["n"] == 3 and header["d"] == 5

    def test_labels_round_trip(self, tmp_path):
        labels = np.array([0, 1, 2, 1, 0])
        io.write_labels(tmp_path / "l.txt", labels)
        np.testing.assert_array_equal(io.read_labels(tmp_path / "l.txt"), labels)

    def test_labels_one_per_line(self, tmp_path):
        io.write_labels(tmp_path / "l.txt", np.array([3, 4]))
        assert (tmp_path / "l.txt").read_text() == "3\n4\n"
