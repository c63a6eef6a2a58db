"""Charge-similarity features: the reversal-frequency graph, its
row-stochastic transition weights, random-walk propagation, query and
document charge-distribution initialization, and the Kronecker fusion
of the two walked distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZero, DimensionMismatch, NegativeFrequency, NoCharges

DEFAULT_ALPHA = 0.4
DEFAULT_WALK_STEPS = 2
DEFAULT_TOP_K = 5
DEFAULT_BOOST = 0.3


def reversal_matrix(size: int, counts: list[tuple[int, int, int]]) -> np.ndarray:
    """Accumulate (from, to, count) triplets into a dense frequency matrix.
    Duplicate pairs sum."""
    g = np.zeros((size, size), dtype=np.int64)
    for frm, to, count in counts:
        if count < 0:
            raise NegativeFrequency(f"count {count} for edge {frm}->{to}")
        g[frm, to] += count
    return g


@dataclass(frozen=True)
class ChargeGraph:
    """Row-stochastic transition weights E over the charge space."""

    transitions: np.ndarray
    alpha: float

    @property
    def size(self) -> int:
        return self.transitions.shape[0]


def build_graph(g: np.ndarray, alpha: float = DEFAULT_ALPHA) -> ChargeGraph:
    """Turn reversal frequencies into transition weights.

    A charge that was never reversed keeps all its mass (identity row);
    otherwise it keeps ``alpha`` and spreads the rest proportionally to
    the off-diagonal reversal frequencies.
    """
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise NegativeFrequency("reversal matrix has negative entries")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0,1], got {alpha}")
    s = g.shape[0]
    off = g.copy()
    np.fill_diagonal(off, 0.0)
    row_sums = off.sum(axis=1)
    e = np.zeros((s, s))
    for i in range(s):
        if row_sums[i] == 0.0:
            e[i, i] = 1.0
        else:
            e[i] = (1.0 - alpha) * off[i] / row_sums[i]
            e[i, i] = alpha
    return ChargeGraph(e, alpha)


def rwog(p0: np.ndarray, graph: ChargeGraph, steps: int = DEFAULT_WALK_STEPS) -> np.ndarray:
    """Random walk on the graph: propagate the distribution ``steps`` times
    along the reversal direction (p <- E^T p)."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    p = np.asarray(p0, dtype=float)
    if p.shape[0] != graph.size:
        raise DimensionMismatch(f"distribution length {p.shape[0]} != graph size {graph.size}")
    for _ in range(steps):
        p = graph.transitions.T @ p
    return p


def init_query_dist(
    ccs: frozenset[int] | set[int],
    predictor_scores: dict[int, float],
    size: int,
    top_k: int = DEFAULT_TOP_K,
    boost: float = DEFAULT_BOOST,
) -> np.ndarray:
    """Initial query charge distribution C_qo: predictor probabilities over
    the candidate charge set, smoothed by boosting the predictor's top-k
    charges, then normalized to sum 1."""
    if not ccs:
        raise NoCharges("candidate charge set is empty")
    p = np.zeros(size)
    for cid in ccs:
        p[cid] = predictor_scores.get(cid, 0.0)
    top = sorted(predictor_scores, key=lambda c: (-predictor_scores[c], c))[:top_k]
    for cid in top:
        p[cid] += boost
    total = p.sum()
    if total <= 0.0:
        raise AllZero("query distribution is all zeros after boosting")
    return p / total


def init_doc_dist(charges: frozenset[int] | set[int], size: int) -> np.ndarray:
    """Initial document charge distribution C_do: uniform over the doc's
    charges."""
    if not charges:
        raise NoCharges("document has no charges")
    p = np.zeros(size)
    for cid in charges:
        p[cid] = 1.0
    return p / p.sum()


def kron_feature(cq: np.ndarray, cd: np.ndarray) -> np.ndarray:
    """Kronecker product of the two walked distributions: out[i*s+j] =
    cq[i] * cd[j]."""
    cq = np.asarray(cq, dtype=float)
    cd = np.asarray(cd, dtype=float)
    if cq.shape != cd.shape:
        raise DimensionMismatch(f"{cq.shape} vs {cd.shape}")
    return np.outer(cq, cd).ravel()


def dump_graph_tsv(graph: ChargeGraph) -> str:
    """Sparse triplet dump: row, col, weight for every nonzero entry."""
    lines = [f"# alpha={graph.alpha}", f"# size={graph.size}"]
    rows, cols = np.nonzero(graph.transitions)
    for i, j in zip(rows, cols):
        lines.append(f"{i}\t{j}\t{float(graph.transitions[i, j])!r}")
    return "\n".join(lines) + "\n"


def load_graph_tsv(text: str) -> ChargeGraph:
    alpha = None
    size = None
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("# alpha="):
            alpha = float(line.split("=", 1)[1])
        elif line.startswith("# size="):
            size = int(line.split("=", 1)[1])
        else:
            i, j, w = line.split("\t")
            entries.append((int(i), int(j), float(w)))
    if alpha is None or size is None:
        raise ValueError("missing alpha/size header")
    e = np.zeros((size, size))
    for i, j, w in entries:
        e[i, j] = w
    return ChargeGraph(e, alpha)
