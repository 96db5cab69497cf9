"""Binary persistence for vector indices and PCA models.

Both layouts are little-endian, fixed-width, and end with a CRC-32 trailer
over every preceding byte.

Vector index (``.vidx``)::

    magic        8 bytes   b"EPCAVIDX"
    version      u16
    dim          u32
    rows         u64
    scalar_kind  u8        0 = f32, 1 = f64
    ids          rows x u64
    payload      rows x dim scalars, row-major
    crc32        u32

PCA model (``.pcam``)::

    magic           8 bytes   b"EPCAMODL"
    version         u16
    d               u32
    k               u32
    n_samples       u64
    total_variance  f64
    train_mean      d x f64
    std_mean        d x f64
    std_scale       d x f64
    components      k x d x f64, row-major
    explained_var   k x f64
    crc32           u32
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

INDEX_MAGIC = b"EPCAVIDX"
MODEL_MAGIC = b"EPCAMODL"
VERSION = 1

_INDEX_HEADER = struct.Struct("<8sHIQB")
_MODEL_HEADER = struct.Struct("<8sHIIQd")
_CRC = struct.Struct("<I")

INDEX_HEADER_BYTES = _INDEX_HEADER.size  # 23
MODEL_HEADER_BYTES = _MODEL_HEADER.size  # 34
TRAILER_BYTES = _CRC.size

SCALAR_KINDS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_KIND_BY_NAME = {"f32": 0, "f64": 1}


@dataclass(eq=False)
class VectorIndex:
    """Embedding collection with one ``uint64`` id per row."""

    ids: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.ids = np.ascontiguousarray(self.ids, dtype="<u8")
        vec = np.asarray(self.vectors)
        if vec.dtype not in (np.float32, np.float64):
            vec = vec.astype(np.float64)
        self.vectors = np.ascontiguousarray(vec, dtype=vec.dtype.newbyteorder("<"))
        if self.vectors.ndim != 2:
            raise FormatError("vectors must be a 2-D array")
        if self.ids.shape != (self.vectors.shape[0],):
            raise FormatError(f"{len(self.ids)} ids for {self.vectors.shape[0]} rows")
        if len(np.unique(self.ids)) != len(self.ids):
            raise FormatError("index ids are not unique")

    @classmethod
    def from_matrix(cls, vectors, ids=None, scalar: str = "f32") -> "VectorIndex":
        vectors = np.asarray(vectors, dtype=SCALAR_KINDS[_KIND_BY_NAME[scalar]])
        if ids is None:
            ids = np.arange(vectors.shape[0], dtype=np.uint64)
        return cls(ids, vectors)

    @property
    def rows(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def scalar_kind(self) -> int:
        return 0 if self.vectors.dtype == np.float32 else 1

    @property
    def scalar_name(self) -> str:
        return "f32" if self.scalar_kind == 0 else "f64"

    def to_bytes(self) -> bytes:
        header = _INDEX_HEADER.pack(INDEX_MAGIC, VERSION, self.dim, self.rows, self.scalar_kind)
        body = header + self.ids.tobytes() + self.vectors.tobytes()
        return body + _CRC.pack(zlib.crc32(body))

    def __eq__(self, other):
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self.vectors.dtype == other.vectors.dtype
            and self.ids.tobytes() == other.ids.tobytes()
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_trailer(data: bytes, expected_size: int, what: str) -> None:
    if len(data) != expected_size:
        kind = "truncated" if len(data) < expected_size else "oversized"
        raise FormatError(f"{what}: {kind} file, expected {expected_size} bytes, got {len(data)}")
    (stored,) = _CRC.unpack_from(data, expected_size - TRAILER_BYTES)
    if zlib.crc32(data[: expected_size - TRAILER_BYTES]) != stored:
        raise FormatError(f"{what}: checksum mismatch")


def _check_magic(data: bytes, magic: bytes, header_size: int, what: str) -> None:
    if len(data) < header_size:
        raise FormatError(f"{what}: truncated header, expected {header_size} bytes, got {len(data)}")
    if data[:8] != magic:
        raise FormatError(f"{what}: bad magic {data[:8]!r}")
    (version,) = struct.unpack_from("<H", data, 8)
    if version != VERSION:
        raise FormatError(f"{what}: unsupported version {version}")


def index_from_bytes(data: bytes, what: str = "index") -> VectorIndex:
    _check_magic(data, INDEX_MAGIC, INDEX_HEADER_BYTES, what)
    _, _, dim, rows, kind = _INDEX_HEADER.unpack_from(data)
    if kind not in SCALAR_KINDS:
        raise FormatError(f"{what}: unknown scalar kind {kind}")
    dtype = SCALAR_KINDS[kind]
    ids_bytes = rows * 8
    payload_bytes = rows * dim * dtype.itemsize
    _check_trailer(data, INDEX_HEADER_BYTES + ids_bytes + payload_bytes + TRAILER_BYTES, what)
    off = INDEX_HEADER_BYTES
    ids = np.frombuffer(data, dtype="<u8", count=rows, offset=off).copy()
    off += ids_bytes
    vectors = np.frombuffer(data, dtype=dtype, count=rows * dim, offset=off).reshape(rows, dim).copy()
    try:
        return VectorIndex(ids, vectors)
    except FormatError as exc:
        raise FormatError(f"{what}: {exc}") from None


def save_index(index: VectorIndex, path: str | Path) -> None:
    _atomic_write(Path(path), index.to_bytes())


def load_index(path: str | Path) -> VectorIndex:
    path = Path(path)
    return index_from_bytes(path.read_bytes(), str(path))


def model_file_size(d: int, k: int) -> int:
    return MODEL_HEADER_BYTES + (3 * d + k * d + k) * 8 + TRAILER_BYTES


def model_to_bytes(model) -> bytes:
    std = model.standardizer
    mean = np.zeros(model.d) if std is None else std.mean
    scale = np.ones(model.d) if std is None else std.scale
    header = _MODEL_HEADER.pack(
        MODEL_MAGIC, VERSION, model.d, model.k, model.n_samples, model.total_variance
    )
    parts = [header]
    for arr in (model.train_mean, mean, scale, model.components, model.explained_variance):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def model_from_bytes(data: bytes, what: str = "model"):
    from .pca import PcaModel, Standardizer

    _check_magic(data, MODEL_MAGIC, MODEL_HEADER_BYTES, what)
    _, _, d, k, n_samples, total_variance = _MODEL_HEADER.unpack_from(data)
    _check_trailer(data, model_file_size(d, k), what)

    off = MODEL_HEADER_BYTES

    def take(count):
        nonlocal off
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
        off += count * 8
        return arr

    train_mean, mean, scale = take(d), take(d), take(d)
    components = take(k * d).reshape(k, d)
    explained_variance = take(k)
    try:
        standardizer = Standardizer(mean, scale, scale == 1.0)
        return PcaModel.from_parts(
            components=components,
            explained_variance=explained_variance,
            total_variance=total_variance,
            train_mean=train_mean,
            n_samples=n_samples,
            standardizer=standardizer,
        )
    except ValueError as exc:
        raise FormatError(f"{what}: {exc}") from None


def save_model(model, path: str | Path) -> None:
    _atomic_write(Path(path), model_to_bytes(model))


def load_model(path: str | Path):
    path = Path(path)
    return model_from_bytes(path.read_bytes(), str(path))


def describe(path: str | Path) -> dict:
    """Decode the header of an index or model file without loading the payload."""
    path = Path(path)
    size = path.stat().st_size
    with path.open("rb") as fh:
        head = fh.read(max(INDEX_HEADER_BYTES, MODEL_HEADER_BYTES))
    magic = head[:8]
    if magic == INDEX_MAGIC and len(head) >= INDEX_HEADER_BYTES:
        _, version, dim, rows, kind = _INDEX_HEADER.unpack_from(head)
        itemsize = SCALAR_KINDS[kind].itemsize if kind in SCALAR_KINDS else None
        return {
            "type": "vector_index",
            "version": version,
            "dim": dim,
            "rows": rows,
            "scalar_kind": {0: "f32", 1: "f64"}.get(kind, f"unknown({kind})"),
            "header_bytes": INDEX_HEADER_BYTES,
            "id_bytes": rows * 8,
            "payload_bytes": rows * dim * itemsize if itemsize else None,
            "trailer_bytes": TRAILER_BYTES,
            "file_bytes": size,
        }
    if magic == MODEL_MAGIC and len(head) >= MODEL_HEADER_BYTES:
        _, version, d, k, n_samples, total_variance = _MODEL_HEADER.unpack_from(head)
        return {
            "type": "pca_model",
            "version": version,
            "d": d,
            "k": k,
            "n_samples": n_samples,
            "total_variance": total_variance,
            "expected_bytes": model_file_size(d, k),
            "file_bytes": size,
        }
    raise FormatError(f"{path}: unrecognised magic {magic!r}")
