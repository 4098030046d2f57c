"""Embedding providers behind one contract, plus a persistent vector store.

Vectors are float32 rows of a fixed dimension, L2-normalized at ingest by
default; similarity math happens downstream in float64. The hashing provider
is a deterministic bag-of-words surrogate so the full pipeline runs without
any model runtime.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import Corpus, EntryId, EntryKind
from .preprocess import clean_only

logger = logging.getLogger(__name__)

_MAGIC = b"A2CVEC01"


class EmbeddingError(Exception):
    """Provider failure or malformed vector batch."""


class StoreError(EmbeddingError):
    """Vector store file is corrupt or incompatible."""


class EmbeddingProvider(Protocol):
    name: str
    dim: int
    max_tokens: int | None

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _truncate(texts: Sequence[str], max_tokens: int | None) -> list[str]:
    if max_tokens is None:
        return list(texts)
    out = []
    for text in texts:
        tokens = text.split()
        if len(tokens) > max_tokens:
            logger.warning("input of %d tokens truncated to %d", len(tokens), max_tokens)
            text = " ".join(tokens[:max_tokens])
        out.append(text)
    return out


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    """Unit-norm copy, computed in float64 and stored as float32."""
    v64 = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(v64))
    if norm == 0.0:
        raise EmbeddingError("cannot normalize a zero vector")
    return (v64 / norm).astype(np.float32)


class HashingProvider:
    """Deterministic test double: each whitespace token bumps one hashed basis axis."""

    def __init__(self, dim: int, max_tokens: int | None = None):
        if dim < 2:
            raise ValueError("dim must be at least 2")
        self.dim = dim
        self.name = f"hash-{dim}"
        self.max_tokens = max_tokens

    def _embed_one(self, text: str) -> np.ndarray:
        tokens = text.split()
        if not tokens:
            raise EmbeddingError("cannot embed a text with zero tokens")
        counts = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            counts[int.from_bytes(digest, "little") % self.dim] += 1.0
        return l2_normalize(counts)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        texts = _truncate(texts, self.max_tokens)
        return np.stack([self._embed_one(t) for t in texts]) if texts else np.zeros((0, self.dim), np.float32)


class RemoteProvider:
    """Client for an embedding service speaking the plain texts-in/vectors-out contract."""

    def __init__(self, base_url: str, name: str, dim: int, max_tokens: int | None = None,
                 timeout: float = 60.0, client=None):
        self.base_url = base_url.rstrip("/")
        self.name = name
        self.dim = dim
        self.max_tokens = max_tokens
        self.timeout = timeout
        self._client = client

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        import httpx

        client = self._client
        if client is None:
            client = self._client = httpx.Client(timeout=self.timeout)
        texts = _truncate(texts, self.max_tokens)
        try:
            resp = client.post(f"{self.base_url}/embed", json={"texts": list(texts)})
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise EmbeddingError(f"embedding service unreachable: {exc}") from exc
        payload = resp.json()
        if payload.get("dim") != self.dim:
            raise EmbeddingError(
                f"provider echoed dim {payload.get('dim')}, expected {self.dim}"
            )
        return np.asarray(payload["vectors"], dtype=np.float32)


class SentenceTransformerProvider:
    """Real model runtime, loaded lazily; interchangeable with the test double."""

    def __init__(self, model_name: str, max_tokens: int | None = 384):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_name)
        self.name = model_name
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.max_tokens = max_tokens

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        texts = _truncate(texts, self.max_tokens)
        return self._model.encode(
            list(texts), convert_to_numpy=True, show_progress_bar=False
        ).astype(np.float32)


def provider_from_spec(spec: str) -> EmbeddingProvider:
    """Build a provider from a spec string: hash:<dim>, remote:<name>:<dim>:<url>, st:<model>."""
    scheme, _, rest = spec.partition(":")
    if scheme == "hash":
        return HashingProvider(dim=int(rest))
    if scheme == "remote":
        name, _, rest2 = rest.partition(":")
        dim, _, url = rest2.partition(":")
        return RemoteProvider(base_url=url, name=name, dim=int(dim))
    if scheme == "st":
        return SentenceTransformerProvider(rest)
    raise ValueError(f"unknown provider spec: {spec!r}")


def embed_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    """Run one batch through a provider and validate the result shape."""
    vectors = provider.embed_batch(texts)
    if vectors.shape != (len(texts), provider.dim):
        raise EmbeddingError(
            f"provider returned shape {vectors.shape}, expected {(len(texts), provider.dim)}"
        )
    if not np.all(np.isfinite(vectors)):
        raise EmbeddingError("provider returned non-finite values")
    return vectors.astype(np.float32)


@dataclass
class EmbeddingStore:
    """Fixed-dimension vectors keyed by entry ID, with provider metadata."""

    provider_name: str
    dim: int
    normalized: bool = True
    vectors: dict[EntryId, np.ndarray] = field(default_factory=dict)
    config_digest: str = ""

    def __len__(self) -> int:
        return len(self.vectors)

    def add(self, entry_id: EntryId, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise StoreError(f"vector for {entry_id} has shape {vec.shape}, store dim {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise StoreError(f"vector for {entry_id} has non-finite values")
        if self.normalized:
            norm = float(np.linalg.norm(vec.astype(np.float64)))
            if abs(norm - 1.0) > 1e-6:
                raise StoreError(f"vector for {entry_id} has norm {norm}, store is normalized")
        self.vectors[entry_id] = vec

    def get(self, entry_id: EntryId) -> np.ndarray:
        try:
            return self.vectors[entry_id]
        except KeyError:
            raise LookupError(f"no vector stored for {entry_id}") from None

    def ids_of_kind(self, kind: EntryKind) -> list[EntryId]:
        return sorted(i for i in self.vectors if i.kind is kind)

    def matrix(self, ids: Sequence[EntryId]) -> np.ndarray:
        return np.stack([self.vectors[i] for i in ids]) if ids else np.zeros((0, self.dim), np.float32)

    def merge(self, other: "EmbeddingStore") -> None:
        if other.dim != self.dim:
            raise StoreError(f"cannot merge stores of dims {self.dim} and {other.dim}")
        if other.normalized != self.normalized:
            raise StoreError("cannot merge normalized and unnormalized stores")
        for entry_id, vec in other.vectors.items():
            self.add(entry_id, vec)


def embed_text(provider: EmbeddingProvider, text: str, normalize: bool = True) -> np.ndarray:
    """Embed one already-cleaned text exactly as store ingestion does."""
    vec = embed_batch(provider, [text])[0]
    return l2_normalize(vec) if normalize else vec


def embed_corpus(
    provider: EmbeddingProvider,
    corpus: Corpus,
    kinds: Iterable[EntryKind] | None = None,
    normalize: bool = True,
    use_title: bool = False,
    batch_size: int = 64,
) -> EmbeddingStore:
    """Embed every non-empty entry of the requested kinds into a fresh store.

    Texts are cleaned on the fly when the entry carries no cleaned form, so
    the store never depends on upstream mutation. The whole batch fails
    without partial writes if the provider misbehaves.
    """
    wanted = set(kinds) if kinds is not None else None
    items: list[tuple[EntryId, str]] = []
    for entry in corpus.entries.values():
        if wanted is not None and entry.id.kind not in wanted:
            continue
        if not entry.raw_text:
            logger.warning("entry %s has no text, skipped from embedding", entry.id)
            continue
        base = f"{entry.title} {entry.raw_text}" if use_title and entry.title else entry.raw_text
        items.append((entry.id, entry.clean_text or clean_only(base)))

    store = EmbeddingStore(provider_name=provider.name, dim=provider.dim, normalized=normalize)
    staged: list[tuple[EntryId, np.ndarray]] = []
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        vectors = embed_batch(provider, [text for _, text in chunk])
        for (entry_id, _), vec in zip(chunk, vectors):
            staged.append((entry_id, l2_normalize(vec) if normalize else vec))
    for entry_id, vec in staged:
        store.add(entry_id, vec)
    return store


def save_store(store: EmbeddingStore, path: str) -> None:
    """Write magic + JSON header + packed little-endian float32 rows + sha256 checksum."""
    ids = sorted(store.vectors, key=lambda i: (i.kind.value, i.raw_id))
    header = json.dumps(
        {
            "provider": store.provider_name,
            "dim": store.dim,
            "normalized": store.normalized,
            "count": len(ids),
            "config_digest": store.config_digest,
            "ids": [[i.kind.value, i.raw_id] for i in ids],
        },
        sort_keys=True,
    ).encode("utf-8")
    payload = b"".join(
        store.vectors[i].astype("<f4", copy=False).tobytes() for i in ids
    )
    body = _MAGIC + struct.pack("<I", len(header)) + header + payload
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())


def load_store(path: str) -> EmbeddingStore:
    """Read a store file back bit-exactly, verifying magic and checksum."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_MAGIC) + 4 + 32 or not blob.startswith(_MAGIC):
        raise StoreError(f"not a vector store file: {path}")
    body, checksum = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise StoreError(f"checksum mismatch in {path}")
    header_len = struct.unpack("<I", body[8:12])[0]
    header = json.loads(body[12 : 12 + header_len].decode("utf-8"))
    store = EmbeddingStore(
        provider_name=header["provider"],
        dim=int(header["dim"]),
        normalized=bool(header["normalized"]),
        config_digest=header.get("config_digest", ""),
    )
    raw = body[12 + header_len :]
    expected = header["count"] * store.dim * 4
    if len(raw) != expected:
        raise StoreError(f"payload is {len(raw)} bytes, header promises {expected}")
    rows = np.frombuffer(raw, dtype="<f4").reshape(header["count"], store.dim)
    for (kind, raw_id), row in zip(header["ids"], rows):
        store.vectors[EntryId(EntryKind(kind), raw_id)] = row.copy()
    return store
