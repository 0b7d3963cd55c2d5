"""File formats: JSON-header raw volumes, feature matrices, label lists."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .volume import SupervoxelMap, Volume, VolumeError

_DTYPES = {"u8": np.uint8, "f32": np.float32, "u32": np.uint32}
_NAMES = {np.dtype(np.uint8): "u8", np.dtype(np.float32): "f32", np.dtype(np.uint32): "u32"}


def _write_raw(header_path: Path, arr: np.ndarray, dtype_name: str) -> None:
    header_path = Path(header_path)
    data_name = header_path.stem + ".raw"
    header = {
        "dims": [int(d) for d in arr.shape],
        "dtype": dtype_name,
        "data": data_name,
    }
    header_path.write_text(json.dumps(header))
    # x fastest-varying on disk
    raw = np.asarray(arr, dtype=_DTYPES[dtype_name], order="F")
    (header_path.parent / data_name).write_bytes(raw.tobytes(order="F"))


def _read_raw(header_path: Path) -> np.ndarray:
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    dims = header["dims"]
    if header["dtype"] not in _DTYPES:
        raise VolumeError(f"unknown dtype {header['dtype']!r}")
    dtype = np.dtype(_DTYPES[header["dtype"]]).newbyteorder("<")
    raw = (header_path.parent / header["data"]).read_bytes()
    flat = np.frombuffer(raw, dtype=dtype)
    if flat.size != int(np.prod(dims)):
        raise VolumeError("raw data size does not match header dims")
    return flat.reshape(dims, order="F")


def write_volume(path: Path, volume: Volume) -> None:
    dtype = _NAMES.get(np.dtype(volume.voxels.dtype), "f32")
    _write_raw(Path(path), volume.voxels, dtype)


def read_volume(path: Path) -> Volume:
    return Volume(_read_raw(Path(path)))


def write_svmap(path: Path, svmap: SupervoxelMap) -> None:
    _write_raw(Path(path), svmap.ids, "u32")


def read_svmap(path: Path, check_connectivity: bool = False) -> SupervoxelMap:
    svmap = SupervoxelMap(_read_raw(Path(path)).astype(np.int64))
    if check_connectivity and not svmap.check_connected():
        raise VolumeError("ingested supervoxel map has disconnected regions")
    return svmap


def write_features(path: Path, features: np.ndarray) -> None:
    path = Path(path)
    feats = np.asarray(features, dtype=np.float32)
    data_name = path.stem + ".raw"
    header = {"n": int(feats.shape[0]), "d": int(feats.shape[1]), "data": data_name}
    path.write_text(json.dumps(header))
    (path.parent / data_name).write_bytes(np.ascontiguousarray(feats).tobytes())


def read_features(path: Path) -> np.ndarray:
    path = Path(path)
    header = json.loads(path.read_text())
    raw = (path.parent / header["data"]).read_bytes()
    flat = np.frombuffer(raw, dtype=np.dtype(np.float32).newbyteorder("<"))
    if flat.size != header["n"] * header["d"]:
        raise VolumeError("feature data size does not match header")
    return flat.reshape(header["n"], header["d"]).astype(float)


def write_labels(path: Path, labels: np.ndarray) -> None:
    Path(path).write_text("".join(f"{int(c)}\n" for c in labels))


def read_labels(path: Path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    return np.array([int(ln) for ln in lines], dtype=np.int64)
