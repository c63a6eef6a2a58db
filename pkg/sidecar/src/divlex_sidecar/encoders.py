"""Embedding and charge-prediction backends for the sidecar.

The fallback backends are pure-python and deterministic so the service can
run (and its contract tests can pass) without any model download. The
transformer backend is optional and loaded lazily.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from pathlib import Path


def load_vocab(path: str | Path) -> list[tuple[int, str]]:
    """Read a ``vocab.jsonl`` file of ``{"id": int, "name": str}`` lines."""
    charges = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            charges.append((int(row["id"]), str(row["name"])))
    charges.sort()
    return charges


class HashingEncoder:
    """Feature-hashing bag of character n-grams (n=2,3), L2-normalized.

    Buckets and signs come from md5 so the output is stable across
    processes and machines.
    """

    def __init__(self, dim: int = 128, max_chars: int = 10_000):
        self.dim = dim
        self.max_chars = max_chars

    def _bucket(self, gram: str) -> tuple[int, float]:
        digest = hashlib.md5(gram.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "big") % self.dim
        sign = 1.0 if digest[4] & 1 else -1.0
        return bucket, sign

    def encode(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = [0.0] * self.dim
            lowered = text[: self.max_chars].lower()
            for n in (2, 3):
                for i in range(len(lowered) - n + 1):
                    bucket, sign = self._bucket(lowered[i : i + n])
                    vec[bucket] += sign
            norm = math.sqrt(sum(v * v for v in vec))
            if norm > 0:
                vec = [v / norm for v in vec]
            out.append(vec)
        return out


class TransformerEncoder:
    """Sentence-transformer encoder; requires the optional dependency and a
    model download. Vectors are L2-normalized; encoding runs in eval mode so
    repeated calls are deterministic."""

    def __init__(self, model_name: str = "sentence-transformers/all-MiniLM-L6-v2",
                 max_chars: int = 10_000):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.max_chars = max_chars

    def encode(self, texts: list[str]) -> list[list[float]]:
        clipped = [t[: self.max_chars] for t in texts]
        vectors = self._model.encode(clipped, normalize_embeddings=True,
                                     convert_to_numpy=True)
        return [[float(v) for v in row] for row in vectors]


class KeywordChargeScorer:
    """Term-frequency charge scorer over the vocabulary's charge names.

    Each charge is scored by how often its name occurs in the text,
    normalized to a distribution; a text that never mentions any charge
    gets the uniform distribution. Deterministic by construction.
    """

    def __init__(self, charges: list[tuple[int, str]]):
        if not charges:
            raise ValueError("charge vocabulary is empty")
        self._charges = list(charges)

    @property
    def vocab_size(self) -> int:
        return len(self._charges)

    def predict(self, text: str, top_n: int = 5) -> list[tuple[int, float]]:
        lowered = text.lower()
        counts = [
            (cid, float(len(re.findall(re.escape(name.lower()), lowered))))
            for cid, name in self._charges
        ]
        total = sum(c for _, c in counts)
        if total > 0:
            scored = [(cid, c / total) for cid, c in counts]
        else:
            scored = [(cid, 1.0 / len(counts)) for cid, _ in counts]
        scored.sort(key=lambda t: (-t[1], t[0]))
        return scored[: max(top_n, 5)]
