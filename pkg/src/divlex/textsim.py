"""Text-similarity features: sliding-window passage slicing, passage
embedding behind a provider interface, cosine similarity with row
max-pooling, and fixed-length padding.

The built-in provider hashes character n-grams so the whole pipeline runs
without any model download; an HTTP sidecar can supply transformer
vectors through the same interface.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import EmptyText, InputTooLong, ProviderError

QUERY_WINDOW = 3
QUERY_STEP = 1
DOC_WINDOW = 13
DOC_STEP = 5
TEXTSIM_LENGTH = 54


@dataclass(frozen=True)
class Passage:
    sentences: tuple[str, ...]

    @property
    def text(self) -> str:
        return "".join(self.sentences)


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic bag-of-character-n-grams embedder (n=2,3) with feature
    hashing and L2 normalization. Stable across processes: buckets come
    from md5, not the per-process ``hash``."""

    def __init__(self, dim: int = 128):
        self.dim = dim

    def _bucket(self, gram: str) -> tuple[int, float]:
        digest = hashlib.md5(gram.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "big") % self.dim
        sign = 1.0 if digest[4] & 1 else -1.0
        return bucket, sign

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            lowered = text.lower()
            for n in (2, 3):
                for i in range(len(lowered) - n + 1):
                    bucket, sign = self._bucket(lowered[i : i + n])
                    out[row, bucket] += sign
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out


class SidecarEmbedder:
    """EmbeddingProvider backed by the /embed endpoint of the sidecar."""

    def __init__(self, url: str, timeout: float = 30.0):
        import httpx

        self._client = httpx.Client(base_url=url.rstrip("/"), timeout=timeout)
        try:
            health = self._client.get("/health").json()
        except Exception as exc:
            raise ProviderError(f"sidecar unreachable at {url}: {exc}") from exc
        self.dim = int(health["dim"])

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        resp = self._client.post("/embed", json={"texts": list(texts)})
        if resp.status_code != 200:
            raise ProviderError(f"/embed returned {resp.status_code}: {resp.text}")
        body = resp.json()
        vectors = np.asarray(body["vectors"], dtype=float)
        if vectors.shape != (len(texts), self.dim):
            raise ProviderError(f"bad vector shape {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise ProviderError("non-finite embedding values")
        return vectors


def csw_slice(sentences: Sequence[str], w: int, d: int) -> list[Passage]:
    """Cut with sliding windows: windows start at the first sentence and
    advance by ``d``; generation stops after the first window whose span
    reaches the last sentence. Every window is padded to ``w`` sentences
    with empty strings."""
    if w < 1 or d < 1:
        raise ValueError("window size and step must be >= 1")
    if not sentences:
        raise EmptyText("cannot slice empty text")
    passages = []
    start = 0
    while True:
        chunk = list(sentences[start : start + w])
        chunk += [""] * (w - len(chunk))
        passages.append(Passage(tuple(chunk)))
        if start + w >= len(sentences):
            break
        start += d
    return passages


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine; rows that embed to the zero vector yield 0."""
    norms_a = np.linalg.norm(a, axis=1)
    norms_b = np.linalg.norm(b, axis=1)
    denom = np.outer(norms_a, norms_b)
    sim = np.zeros((a.shape[0], b.shape[0]))
    mask = denom > 0
    raw = a @ b.T
    sim[mask] = raw[mask] / denom[mask]
    return np.clip(sim, -1.0, 1.0)


def similarity_vector(
    query_passages: Sequence[Passage],
    doc_passages: Sequence[Passage],
    provider: EmbeddingProvider,
) -> np.ndarray:
    """Row max-pool of the query-passage x doc-passage cosine matrix."""
    if not query_passages or not doc_passages:
        raise EmptyText("need at least one passage on each side")
    q_vecs = provider.embed([p.text for p in query_passages])
    d_vecs = provider.embed([p.text for p in doc_passages])
    return cosine_matrix(np.asarray(q_vecs), np.asarray(d_vecs)).max(axis=1)


def pad_fixed(t_s: np.ndarray, length: int = TEXTSIM_LENGTH) -> np.ndarray:
    """Place the similarity vector at both ends of a fixed-length vector
    with a zero core: {T_s, 0...0, T_s}."""
    n = len(t_s)
    if 2 * n > length:
        raise InputTooLong(f"2*{n} similarity entries exceed target length {length}")
    out = np.zeros(length)
    out[:n] = t_s
    out[length - n :] = t_s
    return out


def text_feature(
    query_sentences: Sequence[str],
    doc_sentences: Sequence[str],
    provider: EmbeddingProvider,
    length: int = TEXTSIM_LENGTH,
) -> np.ndarray:
    """Full text-similarity feature for a query/document pair."""
    q_passages = csw_slice(query_sentences, QUERY_WINDOW, QUERY_STEP)
    d_passages = csw_slice(doc_sentences, DOC_WINDOW, DOC_STEP)
    return pad_fixed(similarity_vector(q_passages, d_passages, provider), length)
