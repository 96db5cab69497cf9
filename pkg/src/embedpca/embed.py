"""Sentence embeddings from a provider, with a persistent hash-keyed cache.

Providers implement ``embed_batch(texts) -> list of vectors`` and expose a
``model_name``. :class:`HttpProvider` speaks the OpenAI-compatible
``/embeddings`` wire format; :class:`HashingProvider` is an offline,
deterministic stand-in used for demos and tests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import struct
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import DataError, FormatError, ProviderError, RateLimitError
from .store import INDEX_MAGIC, VectorIndex, load_index

log = logging.getLogger(__name__)

CACHE_MAGIC = b"EPCACACH"
CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<8sH")
_REC_HEAD = struct.Struct("<32sH")
_U32 = struct.Struct("<I")


def text_hash(model_name: str, text: str) -> bytes:
    return hashlib.sha256(model_name.encode("utf-8") + b"\x00" + text.encode("utf-8")).digest()


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    text_hash: bytes
    vector: np.ndarray
    model_name: str

    def __post_init__(self):
        if len(self.text_hash) != 32:
            raise DataError("text_hash must be 32 bytes")
        if self.vector.ndim != 1 or self.vector.shape[0] == 0:
            raise DataError("embedding must be a non-empty 1-D vector")
        if not np.isfinite(self.vector).all():
            raise DataError("embedding contains non-finite values")

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def to_bytes(self) -> bytes:
        name = self.model_name.encode("utf-8")
        body = (_REC_HEAD.pack(self.text_hash, len(name)) + name + _U32.pack(self.dim)
                + np.ascontiguousarray(self.vector, dtype="<f8").tobytes())
        return body + _U32.pack(zlib.crc32(body))


class EmbeddingCache:
    """Append-only on-disk store of :class:`EmbeddingRecord`.

    Records are f64 little-endian, each followed by its own CRC-32. Reads
    come from memory; appends are serialized by a lock.
    """

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        self._records: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        data = self.path.read_bytes()
        if len(data) < _CACHE_HEADER.size:
            raise FormatError(f"{self.path}: truncated cache header")
        magic, version = _CACHE_HEADER.unpack_from(data)
        if magic != CACHE_MAGIC:
            raise FormatError(f"{self.path}: bad magic {magic!r}")
        if version != CACHE_VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        off = _CACHE_HEADER.size
        n = 0
        while off < len(data):
            start = off
            try:
                digest, name_len = _REC_HEAD.unpack_from(data, off)
                off += _REC_HEAD.size + name_len
                (dim,) = _U32.unpack_from(data, off)
                off += 4
                vec = np.frombuffer(data, dtype="<f8", count=dim, offset=off).astype(np.float64)
                off += dim * 8
                (crc,) = _U32.unpack_from(data, off)
                off += 4
            except (struct.error, ValueError):
                raise FormatError(f"{self.path}: truncated record {n} at byte {start}") from None
            if zlib.crc32(data[start:off - 4]) != crc:
                raise FormatError(f"{self.path}: checksum mismatch in record {n}")
            self._records[digest] = vec
            n += 1

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, digest: bytes) -> bool:
        return digest in self._records

    def get(self, digest: bytes) -> np.ndarray | None:
        return self._records.get(digest)

    def add_many(self, records: Sequence[EmbeddingRecord]) -> None:
        with self._lock:
            fresh = [r for r in records if r.text_hash not in self._records]
            if not fresh:
                return
            if self.path is not None:
                new_file = not self.path.exists()
                with self.path.open("ab") as fh:
                    if new_file:
                        fh.write(_CACHE_HEADER.pack(CACHE_MAGIC, CACHE_VERSION))
                    fh.write(b"".join(r.to_bytes() for r in fresh))
            for r in fresh:
                self._records[r.text_hash] = r.vector


class EmbeddingProvider(Protocol):
    model_name: str

    def embed_batch(self, texts: Sequence[str]) -> list[Sequence[float]]: ...


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = "https://api.openai.com/v1/embeddings"
    model_name: str = "text-embedding-3-large"
    api_key_env: str = "OPENAI_API_KEY"
    batch_size: int = 64
    max_retries: int = 5
    backoff_base_ms: float = 500.0
    timeout_s: float = 60.0
    max_workers: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.max_retries < 0:
            raise DataError("max_retries must be >= 0")
        if self.max_workers < 1:
            raise DataError("max_workers must be >= 1")


# (url, headers, body, timeout) -> (status_code, decoded JSON or None)
Transport = Callable[[str, dict, dict, float], "tuple[int, object]"]


def requests_transport(url: str, headers: dict, body: dict, timeout: float):
    import requests

    try:
        resp = requests.post(url, headers=headers, json=body, timeout=timeout)
    except requests.RequestException as exc:
        raise ConnectionError(str(exc)) from exc
    try:
        payload = resp.json()
    except ValueError:
        payload = None
    return resp.status_code, payload


class HttpProvider:
    """OpenAI-compatible embeddings endpoint with exponential backoff and jitter."""

    def __init__(self, cfg: ProviderConfig, transport: Transport | None = None,
                 sleep: Callable[[float], None] = time.sleep, rng: random.Random | None = None):
        self.cfg = cfg
        self.model_name = cfg.model_name
        self.transport = transport or requests_transport
        self.sleep = sleep
        self.rng = rng or random.Random()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _backoff(self, attempt: int) -> float:
        base = self.cfg.backoff_base_ms / 1000.0 * (2**attempt)
        return base * (1.0 + self.rng.random())

    def embed_batch(self, texts: Sequence[str]) -> list[Sequence[float]]:
        body = {"model": self.cfg.model_name, "input": list(texts)}
        last = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                self.sleep(self._backoff(attempt - 1))
            try:
                status, payload = self.transport(self.cfg.endpoint, self._headers(), body,
                                                 self.cfg.timeout_s)
            except (ConnectionError, TimeoutError, OSError) as exc:
                last = ProviderError(f"transport failure: {exc}")
                continue
            if status == 429:
                last = RateLimitError(f"rate limited by {self.cfg.endpoint}")
                continue
            if status >= 500:
                last = ProviderError(f"provider returned HTTP {status}")
                continue
            if status != 200:
                raise ProviderError(f"provider rejected request: HTTP {status}")
            return self._parse(payload, len(texts))
        raise type(last)(f"{last} (after {self.cfg.max_retries + 1} attempts)")

    @staticmethod
    def _parse(payload, expected: int) -> list[Sequence[float]]:
        try:
            data = sorted(payload["data"], key=lambda item: item.get("index", 0))
            vectors = [item["embedding"] for item in data]
        except (TypeError, KeyError, AttributeError):
            raise ProviderError("malformed provider response") from None
        if len(vectors) != expected:
            raise ProviderError(f"provider returned {len(vectors)} vectors for {expected} inputs")
        return vectors


_TOKEN = re.compile(r"\w+", re.UNICODE)


class HashingProvider:
    """Offline embeddings: the sum of seeded Gaussian vectors of each lowercase word.

    Sentences sharing words get correlated vectors, which is enough to
    exercise the whole pipeline without network access.
    """

    def __init__(self, dim: int = 256, model_name: str | None = None):
        if dim < 1:
            raise DataError("dim must be >= 1")
        self.dim = dim
        self.model_name = model_name or f"hashing-{dim}"
        self._token = lru_cache(maxsize=65536)(self._token_vector)

    def _token_vector(self, token: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
        return np.random.Generator(np.random.PCG64(seed)).standard_normal(self.dim)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            tokens = _TOKEN.findall(text.lower()) or [text]
            vec = np.zeros(self.dim)
            for tok in tokens:
                vec += self._token(tok)
            out.append(vec)
        return out


def _validate_vector(raw, text_index: int, dim: int | None) -> np.ndarray:
    try:
        vec = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProviderError(f"non-numeric embedding for input {text_index}") from None
    if vec.ndim != 1 or vec.shape[0] == 0:
        raise ProviderError(f"embedding for input {text_index} is not a vector")
    if dim is not None and vec.shape[0] != dim:
        raise ProviderError(
            f"provider returned dimension {vec.shape[0]} for input {text_index}, expected {dim}"
        )
    if not np.isfinite(vec).all():
        raise ProviderError(f"embedding for input {text_index} has non-finite values")
    return vec


def embed_texts(
    texts: Sequence[str],
    provider: EmbeddingProvider,
    cache: EmbeddingCache | str | Path | None = None,
    batch_size: int = 64,
    max_workers: int = 1,
    expected_dim: int | None = None,
) -> np.ndarray:
    """Embed ``texts``; row ``i`` of the result belongs to ``texts[i]``.

    Cached texts never reach the provider. Distinct missing texts are sent
    in batches, optionally on several threads; results are placed by input
    position, not by arrival order.
    """
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")
    if not isinstance(cache, EmbeddingCache):
        cache = EmbeddingCache(cache)
    model = provider.model_name
    digests = [text_hash(model, t) for t in texts]

    missing: dict[bytes, str] = {}
    for d, t in zip(digests, texts):
        if d not in cache and d not in missing:
            missing[d] = t
    todo = list(missing.items())
    batches = [todo[i:i + batch_size] for i in range(0, len(todo), batch_size)]
    if batches:
        log.info("embedding %d uncached texts in %d batches", len(todo), len(batches))

    def fetch(batch):
        vectors = provider.embed_batch([t for _, t in batch])
        if len(vectors) != len(batch):
            raise ProviderError(f"provider returned {len(vectors)} vectors for {len(batch)} inputs")
        return [
            EmbeddingRecord(d, _validate_vector(v, i, expected_dim), model)
            for i, ((d, _), v) in enumerate(zip(batch, vectors))
        ]

    if max_workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for records in pool.map(fetch, batches):
                cache.add_many(records)
    else:
        for batch in batches:
            cache.add_many(fetch(batch))

    if not texts:
        return np.zeros((0, expected_dim or 0))
    rows = [cache.get(d) for d in digests]
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise ProviderError(f"inconsistent embedding dimensions {sorted(dims)}")
    if expected_dim is not None and dims != {expected_dim}:
        raise ProviderError(f"cached embeddings have dimension {dims.pop()}, expected {expected_dim}")
    return np.vstack(rows)


def read_vectors(path: str | Path) -> VectorIndex:
    """Read a binary vector index or a JSONL file of ``{"id", "vector"}`` objects."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open("rb") as fh:
        head = fh.read(len(INDEX_MAGIC))
    if head == INDEX_MAGIC:
        return load_index(path)

    ids, rows, dim = [], [], None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                vec = np.asarray(obj["vector"], dtype=np.float64)
                rid = int(obj.get("id", len(ids)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise FormatError(f"{path}: row {lineno}: expected {{\"id\", \"vector\"}}") from None
            if vec.ndim != 1:
                raise FormatError(f"{path}: row {lineno}: vector must be a flat list")
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise FormatError(f"{path}: row {lineno}: dimension {vec.shape[0]}, expected {dim}")
            if not np.isfinite(vec).all():
                raise FormatError(f"{path}: row {lineno}: non-finite values")
            ids.append(rid)
            rows.append(vec)
    if not rows:
        raise FormatError(f"{path}: no vectors")
    return VectorIndex(np.array(ids, dtype=np.uint64), np.vstack(rows))


def load_vectors(path: str | Path) -> np.ndarray:
    """Embedding matrix from ``path`` in file row order."""
    return read_vectors(path).vectors


def write_vectors_jsonl(index: VectorIndex, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rid, vec in zip(index.ids, index.vectors):
            fh.write(json.dumps({"id": int(rid), "vector": [float(x) for x in vec]}) + "\n")
