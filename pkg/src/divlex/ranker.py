"""Score fusion and ranking: the MLP ranker, its expected-metric training
labels, and the baselines (BM25, MMR, IA-select/exIA-select) plus the
ablation feature masks."""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyQuery,
    NonFiniteLoss,
    PoolTooSmall,
)

HIDDEN_SIZES = (128, 32, 4)
LIST_LENGTH = 10
DEFAULT_MC_SAMPLES = 32

MetricFn = Callable[[Sequence[str]], float]


# ---------------------------------------------------------------------------
# MLP ranker


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


@dataclass
class RankerModel:
    """Feed-forward ranker: ReLU hidden layers, sigmoid output in (0,1)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def initialize(cls, input_dim: int, hidden=HIDDEN_SIZES, seed: int = 0) -> "RankerModel":
        rng = np.random.default_rng(seed)
        sizes = [input_dim, *hidden, 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            scale = math.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"feature length {x.shape[1]} != model input {self.input_dim}")
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = _relu(h @ w + b)
        return _sigmoid(h @ self.weights[-1] + self.biases[-1]).ravel()

    def score(self, features: np.ndarray) -> float:
        return float(self.forward(features)[0])

    def to_json(self) -> str:
        payload = {
            "format": "divlex-ranker-v1",
            "layer_sizes": self.layer_sizes,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "RankerModel":
        payload = json.loads(text)
        if payload.get("format") != "divlex-ranker-v1":
            raise ValueError("unrecognized checkpoint format")
        return cls(
            [np.asarray(w) for w in payload["weights"]],
            [np.asarray(b) for b in payload["biases"]],
        )


def rank(model: RankerModel, features_by_doc: dict[str, np.ndarray]) -> list[str]:
    """Descending score order; ties broken by ascending doc id."""
    ids = sorted(features_by_doc)
    scores = model.forward(np.stack([features_by_doc[i] for i in ids]))
    return [i for _, i in sorted(zip(-scores, ids), key=lambda t: (t[0], t[1]))]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    epochs: int = 1
    batch_size: int = 64
    seed: int = 0
    hidden: tuple[int, ...] = HIDDEN_SIZES


def train(samples: Iterable[tuple[np.ndarray, float]], config: TrainConfig) -> RankerModel:
    """Fit the MLP with Adam on mean-squared error against the expected-
    metric labels. Samples are consumed in stream order; the run is fully
    deterministic for a fixed config."""
    features, labels = [], []
    for x, y in samples:
        features.append(np.asarray(x, dtype=float))
        labels.append(float(y))
    if not features:
        raise ValueError("need at least one training sample")
    x_all = np.stack(features)
    y_all = np.asarray(labels)

    model = RankerModel.initialize(x_all.shape[1], config.hidden, seed=config.seed)
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    n_layers = len(model.weights)

    for _ in range(config.epochs):
        for start in range(0, len(x_all), config.batch_size):
            xb = x_all[start : start + config.batch_size]
            yb = y_all[start : start + config.batch_size]

            # forward, keeping activations
            acts = [xb]
            h = xb
            for w, b in zip(model.weights[:-1], model.biases[:-1]):
                h = _relu(h @ w + b)
                acts.append(h)
            out = _sigmoid(h @ model.weights[-1] + model.biases[-1]).ravel()

            loss = float(np.mean((out - yb) ** 2))
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss}")

            # backward: d(mse)/d(out) * sigmoid'
            delta = (2.0 / len(yb)) * (out - yb) * out * (1.0 - out)
            delta = delta[:, None]
            grads_w = [None] * n_layers
            grads_b = [None] * n_layers
            for layer in range(n_layers - 1, -1, -1):
                grads_w[layer] = acts[layer].T @ delta
                grads_b[layer] = delta.sum(axis=0)
                if layer > 0:
                    delta = (delta @ model.weights[layer].T) * (acts[layer] > 0)

            step += 1
            grads = grads_w + grads_b
            for i, (p, g) in enumerate(zip(params, grads)):
                m[i] = beta1 * m[i] + (1 - beta1) * g
                v[i] = beta2 * v[i] + (1 - beta2) * g * g
                m_hat = m[i] / (1 - beta1**step)
                v_hat = v[i] / (1 - beta2**step)
                p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

    return model


# ---------------------------------------------------------------------------
# Expected-metric training labels


def _assemble(
    prefix: Sequence[str], k: int, d: str, completion: Iterable[str], length: int
) -> list[str]:
    """Lay out a ranked list: prefix at the top, d at position k (1-based),
    remaining slots filled from the completion stream."""
    fill = iter(completion)
    out = []
    for pos in range(1, length + 1):
        if pos <= len(prefix):
            out.append(prefix[pos - 1])
        elif pos == k:
            out.append(d)
        else:
            out.append(next(fill))
    return out


def _check_pool(prefix, k, d, pool):
    others = [x for x in pool if x not in prefix and x != d]
    length = min(LIST_LENGTH, len(prefix) + 1 + len(others))
    if d in prefix:
        raise ValueError(f"candidate {d} already in the prefix")
    if not 1 <= k <= LIST_LENGTH:
        raise ValueError(f"position k={k} outside [1,{LIST_LENGTH}]")
    if len(prefix) >= k:
        raise ValueError("prefix already covers position k")
    if k > length:
        raise PoolTooSmall(f"pool of {len(pool)} cannot reach position {k}")
    return others, length


def expected_reward(
    prefix: Sequence[str],
    k: int,
    d: str,
    pool: Sequence[str],
    metric: MetricFn,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> float:
    """Monte-Carlo estimate of the expected metric value over ranked lists
    with ``d`` fixed at position ``k`` and the open slots filled uniformly
    without replacement from the pool."""
    others, length = _check_pool(prefix, k, d, pool)
    rng = random.Random(seed)
    total = 0.0
    for _ in range(mc_samples):
        completion = others[:]
        rng.shuffle(completion)
        total += metric(_assemble(prefix, k, d, completion, length))
    return total / mc_samples


def expected_reward_exhaustive(
    prefix: Sequence[str], k: int, d: str, pool: Sequence[str], metric: MetricFn
) -> float:
    """Exact expectation by enumerating every completion. Exponential;
    test oracle for small pools only."""
    import itertools

    others, length = _check_pool(prefix, k, d, pool)
    slots = length - len(prefix) - 1
    total = 0.0
    count = 0
    for perm in itertools.permutations(others, slots):
        total += metric(_assemble(prefix, k, d, perm, length))
        count += 1
    return total / count if count else metric(_assemble(prefix, k, d, [], length))


def training_label(
    prefix: Sequence[str],
    k: int,
    d: str,
    pool: Sequence[str],
    metric: MetricFn,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    exhaustive: bool = False,
) -> float:
    """Min-max normalized expected reward of ``d`` against every alternative
    candidate at the same position. The Monte-Carlo path shares completion
    randomness across alternatives so their estimates are comparable.
    Degenerate case (all alternatives equal) maps to 0.5."""
    alternatives = sorted(x for x in pool if x not in prefix)
    if d not in alternatives:
        raise ValueError(f"candidate {d} not in pool")
    rewards: dict[str, float] = {}
    if exhaustive:
        for a in alternatives:
            rewards[a] = expected_reward_exhaustive(prefix, k, a, pool, metric)
    else:
        rng = random.Random(seed)
        totals = {a: 0.0 for a in alternatives}
        shuffles = []
        base = [x for x in pool if x not in prefix]
        for _ in range(mc_samples):
            order = base[:]
            rng.shuffle(order)
            shuffles.append(order)
        for a in alternatives:
            others, length = _check_pool(prefix, k, a, pool)
            for order in shuffles:
                completion = [x for x in order if x != a]
                totals[a] += metric(_assemble(prefix, k, a, completion, length))
        rewards = {a: t / mc_samples for a, t in totals.items()}
    lo = min(rewards.values())
    hi = max(rewards.values())
    if hi == lo:
        return 0.5
    return (rewards[d] - lo) / (hi - lo)


@dataclass(frozen=True)
class TrainingSample:
    features: np.ndarray
    label: float
    query_id: str = ""
    doc_id: str = ""


def build_training_set(
    train_queries: Sequence[str],
    pool_of: Callable[[str], Sequence[str]],
    feature_fn: Callable[[str, str], np.ndarray],
    metric_factory: Callable[[str], MetricFn],
    n_samples: int,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> Iterable[TrainingSample]:
    """Stream of (features, label) pairs: uniform random train query,
    candidate, and position in [1,10], with a random prefix ahead of the
    position and the Eq.-style min-max label over all alternatives."""
    rng = random.Random(seed)
    for i in range(n_samples):
        qid = rng.choice(list(train_queries))
        pool = sorted(pool_of(qid))
        k = rng.randint(1, min(LIST_LENGTH, len(pool)))
        prefix = rng.sample(pool, k - 1)
        d = rng.choice([x for x in pool if x not in prefix])
        label = training_label(
            prefix, k, d, pool, metric_factory(qid),
            mc_samples=mc_samples, seed=rng.getrandbits(32),
        )
        yield TrainingSample(feature_fn(qid, d), label, qid, d)


# ---------------------------------------------------------------------------
# Ablation variants

VARIANTS = ("full", "text_only", "charge_only", "random")


def apply_variant(
    features: np.ndarray, variant: str, text_len: int, noise_seed: int = 0
) -> np.ndarray:
    """Feature masks for the ablation study: zero the charge block, zero
    the text block, or replace everything with a seeded random vector."""
    if variant == "full":
        return features
    out = np.array(features, dtype=float)
    if variant == "text_only":
        out[text_len:] = 0.0
    elif variant == "charge_only":
        out[:text_len] = 0.0
    elif variant == "random":
        out = np.random.default_rng(noise_seed).uniform(-1.0, 1.0, size=out.shape)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return out


# ---------------------------------------------------------------------------
# BM25


_TOKEN_RE = re.compile(r"[a-z0-9一-鿿]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def bm25_rank(
    query_tokens: Sequence[str],
    doc_tokens: dict[str, Sequence[str]],
    k1: float = 1.2,
    b: float = 0.75,
) -> list[tuple[str, float]]:
    """Okapi BM25 over the candidate pool with the non-negative idf variant
    idf = ln(1 + (N - df + 0.5)/(df + 0.5)). Repeated query terms count
    with their query term frequency (the k3 -> inf limit of the full Okapi
    form). Descending score, ties by ascending doc id."""
    if not query_tokens:
        raise EmptyQuery("query has no tokens")
    ids = sorted(doc_tokens)
    n_docs = len(ids)
    lengths = {i: len(doc_tokens[i]) for i in ids}
    avgdl = sum(lengths.values()) / n_docs if n_docs else 0.0

    counts = {i: {} for i in ids}
    for i in ids:
        for tok in doc_tokens[i]:
            counts[i][tok] = counts[i].get(tok, 0) + 1

    qtf = {}
    for tok in query_tokens:
        qtf[tok] = qtf.get(tok, 0) + 1

    scores = {i: 0.0 for i in ids}
    for term, weight in qtf.items():
        df = sum(1 for i in ids if term in counts[i])
        if df == 0:
            continue
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        for i in ids:
            tf = counts[i].get(term, 0)
            if tf == 0:
                continue
            norm = 1.0 - b + b * (lengths[i] / avgdl if avgdl else 0.0)
            scores[i] += weight * idf * tf * (k1 + 1.0) / (tf + k1 * norm)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


# ---------------------------------------------------------------------------
# MMR


def mmr_rank(
    relevance: dict[str, float],
    doc_vectors: dict[str, np.ndarray],
    lam: float,
) -> list[str]:
    """Greedy maximal-marginal-relevance: next pick maximizes
    (1 - lam) * relevance - lam * mean cosine to the already-selected docs.
    The first pick is pure relevance."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0,1]")
    remaining = sorted(relevance)
    norms = {
        i: doc_vectors[i] / n if (n := np.linalg.norm(doc_vectors[i])) > 0 else doc_vectors[i]
        for i in remaining
    }
    selected: list[str] = []
    while remaining:
        best_id, best_score = None, -math.inf
        for i in remaining:
            if selected:
                novelty = float(
                    np.mean([norms[i] @ norms[s] for s in selected])
                )
            else:
                novelty = 0.0
            score = (1.0 - lam) * relevance[i] - lam * novelty
            if score > best_score:
                best_id, best_score = i, score
        selected.append(best_id)
        remaining.remove(best_id)
    return selected


# ---------------------------------------------------------------------------
# IA-select


def ia_select_rank(
    intent_weights: dict[int, float],
    per_intent_relevance: dict[str, dict[int, float]],
) -> list[str]:
    """Greedy intent-aware selection: pick the doc maximizing the residual-
    weighted sum of per-intent relevance, then shrink each intent's
    residual weight by (1 - V(d|k)). The exIA variant differs only in the
    initial weights the caller passes in."""
    residual = dict(intent_weights)
    remaining = sorted(per_intent_relevance)
    selected: list[str] = []
    while remaining:
        best_id, best_score = None, -math.inf
        for i in remaining:
            score = sum(
                residual[k] * per_intent_relevance[i].get(k, 0.0) for k in residual
            )
            if score > best_score:
                best_id, best_score = i, score
        selected.append(best_id)
        remaining.remove(best_id)
        for k in residual:
            residual[k] *= 1.0 - per_intent_relevance[best_id].get(k, 0.0)
    return selected
