"""Sentence embeddings: providers, the offline stub, and the on-disk cache.

Cache layout (all little-endian)::

    b"EMB1"  u32 count  u32 dimension
    count x ( u64 fnv1a(text)  dimension x f32 )
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    CacheCorruptionError,
    CacheFormatError,
    CacheSpecError,
    ConfigError,
    InputError,
    ProviderError,
    StaleCacheError,
)

log = logging.getLogger(__name__)

__all__ = [
    "fnv1a_64",
    "EmbeddingSpec",
    "EmbeddingVector",
    "EmbeddingCache",
    "EmbeddingProvider",
    "StubProvider",
    "SentenceTransformerProvider",
    "PROVIDERS",
    "get_provider",
    "stub_embed",
    "embed_text",
    "embed_batch",
    "build_cache",
    "write_cache",
    "read_cache",
    "stale_rows",
    "check_fresh",
]

MAGIC = b"EMB1"
_HEADER = np.dtype([("magic", "S4"), ("count", "<u4"), ("dim", "<u4")])

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(text: str) -> int:
    h = _FNV_OFFSET
    for b in text.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EmbeddingSpec:
    provider_name: str
    dimension: int

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ConfigError(f"embedding dimension must be >= 1, got {self.dimension}")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    source_hash: int

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 1:
            raise InputError(f"embedding must be 1-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("embedding contains non-finite values")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.source_hash == other.source_hash and np.array_equal(self.values, other.values)


class EmbeddingProvider:
    """Maps texts to fixed-size sentence vectors.

    Subclasses implement :meth:`encode` and must be deterministic per text.
    """

    name: str = "provider"
    dimension: int = 0
    pooling: str = "mean"

    @property
    def spec(self) -> EmbeddingSpec:
        return EmbeddingSpec(self.name, self.dimension)

    @property
    def metadata(self) -> dict[str, object]:
        return {"name": self.name, "dimension": self.dimension, "pooling": self.pooling}

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError


def stub_embed(text: str, dimension: int, seed: int = 0) -> EmbeddingVector:
    """Bag-of-words random projection used for offline runs.

    Each whitespace token seeds its own generator from ``(seed, fnv1a(token))``
    and draws a standard-normal vector; the sum is L2-normalised.
    """
    if dimension < 1:
        raise ConfigError(f"dimension must be >= 1, got {dimension}")
    acc = np.zeros(dimension, dtype=np.float64)
    for tok in text.split():
        acc += np.random.default_rng([seed, fnv1a_64(tok)]).standard_normal(dimension)
    norm = np.linalg.norm(acc)
    if norm > 0:
        acc /= norm
    return EmbeddingVector(acc.astype(np.float32), fnv1a_64(text))


class StubProvider(EmbeddingProvider):
    pooling = "sum-of-token-vectors, l2-normalised"

    def __init__(self, dimension: int, seed: int = 0) -> None:
        if dimension < 1:
            raise ConfigError(f"stub dimension must be >= 1, got {dimension}")
        self.name = "stub"
        self.dimension = dimension
        self.seed = seed

    @property
    def metadata(self) -> dict[str, object]:
        return {**super().metadata, "seed": self.seed}

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dimension), dtype=np.float32)
        for i, t in enumerate(texts):
            out[i] = stub_embed(t, self.dimension, self.seed).values
        return out


class SentenceTransformerProvider(EmbeddingProvider):
    """Pretrained encoder loaded through ``sentence-transformers``.

    Plain Hugging Face checkpoints are wrapped with mean pooling. The model is
    loaded lazily; Hugging Face credentials and mirrors come from the usual
    ``HF_TOKEN`` / ``HF_ENDPOINT`` environment variables.
    """

    def __init__(self, name: str, model_id: str, dimension: int, max_seq_length: int = 512, device: str = "cpu") -> None:
        self.name = name
        self.model_id = model_id
        self.dimension = dimension
        self.max_seq_length = max_seq_length
        self.device = device
        self._model = None

    @property
    def metadata(self) -> dict[str, object]:
        return {**super().metadata, "model_id": self.model_id, "max_seq_length": self.max_seq_length}

    def _load(self):
        if self._model is None:
            try:
                from sentence_transformers import SentenceTransformer
            except ImportError as exc:
                raise ProviderError(f"sentence-transformers is not installed: {exc}") from exc
            try:
                from sentence_transformers.sentence_transformer.modules import Pooling, Transformer
            except ImportError:  # releases before 5.x
                from sentence_transformers.models import Pooling, Transformer
            try:
                word = Transformer(self.model_id, max_seq_length=self.max_seq_length)
                pool = Pooling(word.get_word_embedding_dimension(), pooling_mode="mean")
                self._model = SentenceTransformer(modules=[word, pool], device=self.device)
            except Exception as exc:  # network, auth, missing files
                raise ProviderError(f"cannot load encoder {self.model_id!r}: {exc}") from exc
            got = self._model.get_sentence_embedding_dimension()
            if got != self.dimension:
                raise ProviderError(f"{self.model_id} emits {got}-dim vectors, expected {self.dimension}")
        return self._model

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        model = self._load()
        try:
            out = model.encode(list(texts), batch_size=max(1, len(texts)), convert_to_numpy=True, show_progress_bar=False)
        except Exception as exc:
            raise ProviderError(f"{self.name} failed to encode: {exc}") from exc
        return np.asarray(out, dtype=np.float32)


PROVIDERS: dict[str, tuple[str, int]] = {
    "bangla-bert": ("csebuetnlp/banglabert", 768),
    "bangla-bert-base": ("sagorsarker/bangla-bert-base", 768),
    "sahaj-bert": ("neuropark/sahajBERT", 1024),
}


def get_provider(name: str, dim: int | None = None, seed: int = 0) -> EmbeddingProvider:
    if name == "stub":
        if dim is None:
            raise ConfigError("--dim is required for the stub provider")
        return StubProvider(dim, seed)
    if name not in PROVIDERS:
        raise ConfigError(f"unknown provider {name!r}; choose from {sorted([*PROVIDERS, 'stub'])}")
    model_id, native = PROVIDERS[name]
    if dim is not None and dim != native:
        raise ConfigError(f"provider {name} emits {native}-dim vectors, not {dim}")
    return SentenceTransformerProvider(name, model_id, native)


def _check_text(text: str, index: int | None = None) -> None:
    if not isinstance(text, str) or not text.strip():
        where = f"row {index}: " if index is not None else ""
        raise InputError(f"{where}cannot embed empty text")


def _wrap(text: str, values: np.ndarray, provider: EmbeddingProvider) -> EmbeddingVector:
    if values.shape != (provider.dimension,):
        raise ProviderError(f"{provider.name} returned shape {values.shape}, expected ({provider.dimension},)")
    return EmbeddingVector(values, fnv1a_64(text))


def embed_text(text: str, provider: EmbeddingProvider) -> EmbeddingVector:
    _check_text(text)
    return _wrap(text, provider.encode([text])[0], provider)


def embed_batch(
    texts: Sequence[str], provider: EmbeddingProvider, batch_size: int = 32, workers: int = 1
) -> list[EmbeddingVector]:
    """Embed ``texts`` in chunks; output order always matches input order."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    for i, t in enumerate(texts):
        _check_text(t, i)
    starts = list(range(0, len(texts), batch_size))

    def run(start: int) -> np.ndarray:
        chunk = texts[start : start + batch_size]
        try:
            return provider.encode(chunk)
        except ProviderError as exc:
            if exc.index is not None:
                raise
            raise ProviderError(str(exc), index=start) from exc

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, starts))
    else:
        blocks = [run(s) for s in starts]

    out: list[EmbeddingVector] = []
    for start, block in zip(starts, blocks):
        for j, values in enumerate(block):
            try:
                out.append(_wrap(texts[start + j], values, provider))
            except Exception as exc:
                raise ProviderError(str(exc), index=start + j) from exc
    return out


@dataclass(eq=False)
class EmbeddingCache:
    """Embeddings for a dataset, row ``i`` aligned with record ``i``."""

    spec: EmbeddingSpec
    vectors: np.ndarray  # (count, dimension) float32
    hashes: np.ndarray  # (count,) uint64

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.hashes = np.ascontiguousarray(self.hashes, dtype=np.uint64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.spec.dimension:
            raise CacheSpecError(f"vectors shape {self.vectors.shape} does not match dimension {self.spec.dimension}")
        if self.hashes.shape != (self.vectors.shape[0],):
            raise CacheSpecError("hash count does not match vector count")

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingCache):
            return NotImplemented
        return (
            self.spec.dimension == other.spec.dimension
            and np.array_equal(self.hashes, other.hashes)
            and self.vectors.tobytes() == other.vectors.tobytes()
        )

    @property
    def rows(self) -> list[EmbeddingVector]:
        return [EmbeddingVector(v, int(h)) for v, h in zip(self.vectors, self.hashes)]

    @classmethod
    def from_rows(cls, spec: EmbeddingSpec, rows: Sequence[EmbeddingVector]) -> "EmbeddingCache":
        vecs = np.stack([r.values for r in rows]) if rows else np.zeros((0, spec.dimension), np.float32)
        return cls(spec, vecs, np.array([r.source_hash for r in rows], dtype=np.uint64))

    def subset(self, indices: Sequence[int]) -> "EmbeddingCache":
        idx = np.asarray(indices, dtype=np.int64)
        return EmbeddingCache(self.spec, self.vectors[idx], self.hashes[idx])


def build_cache(texts: Sequence[str], provider: EmbeddingProvider, batch_size: int = 32, workers: int = 1) -> EmbeddingCache:
    return EmbeddingCache.from_rows(provider.spec, embed_batch(texts, provider, batch_size, workers))


def _row_dtype(dim: int) -> np.dtype:
    return np.dtype([("hash", "<u8"), ("vec", "<f4", (dim,))])


def write_cache(cache: EmbeddingCache, path: str | Path) -> None:
    if len(cache) == 0:
        raise InputError("refusing to write an empty embedding cache")
    header = np.array([(MAGIC, len(cache), cache.spec.dimension)], dtype=_HEADER)
    body = np.empty(len(cache), dtype=_row_dtype(cache.spec.dimension))
    body["hash"] = cache.hashes
    body["vec"] = cache.vectors
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(header.tobytes())
        fh.write(body.tobytes())
    tmp.replace(path)


def read_cache(path: str | Path, expected_dim: int | None = None, provider_name: str = "unknown") -> EmbeddingCache:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise CacheFormatError(f"{path}: not an embedding cache (bad magic)")
    if len(raw) < _HEADER.itemsize:
        raise CacheCorruptionError(f"{path}: truncated header")
    header = np.frombuffer(raw, dtype=_HEADER, count=1)[0]
    count, dim = int(header["count"]), int(header["dim"])
    if dim < 1:
        raise CacheCorruptionError(f"{path}: dimension 0 in header")
    row = _row_dtype(dim)
    expected_size = _HEADER.itemsize + count * row.itemsize
    if len(raw) != expected_size:
        raise CacheCorruptionError(f"{path}: expected {expected_size} bytes for {count}x{dim}, found {len(raw)}")
    if expected_dim is not None and dim != expected_dim:
        raise CacheSpecError(f"{path}: cache has dimension {dim}, expected {expected_dim}")
    body = np.frombuffer(raw, dtype=row, count=count, offset=_HEADER.itemsize)
    vectors = body["vec"].copy()
    if not np.all(np.isfinite(vectors)):
        raise CacheCorruptionError(f"{path}: non-finite values in cache")
    return EmbeddingCache(EmbeddingSpec(provider_name, dim), vectors, body["hash"].copy())


def stale_rows(cache: EmbeddingCache, texts: Sequence[str]) -> list[int]:
    """Row indices whose stored hash no longer matches ``texts``.

    A length mismatch marks every row past the shorter side as stale.
    """
    n = min(len(cache), len(texts))
    current = np.array([fnv1a_64(t) for t in texts[:n]], dtype=np.uint64)
    bad = np.nonzero(cache.hashes[:n] != current)[0].tolist()
    bad.extend(range(n, max(len(cache), len(texts))))
    return bad


def check_fresh(cache: EmbeddingCache, texts: Sequence[str]) -> None:
    bad = stale_rows(cache, texts)
    if bad:
        raise StaleCacheError(bad)
