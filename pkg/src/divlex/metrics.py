"""Diversity evaluation metrics: graded NDCG, intent-weighted NDCG-IA,
and alpha-NDCG with intent filtering and label binarization.

All functions are pure; rankings arrive as ordered doc-id lists and
grades via a ``grade_of(charge_id, doc_id) -> int`` lookup, so the same
code evaluates real datasets and the tiny hand-built cases in tests.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

from scipy.stats import ttest_rel

EVAL_CUTOFFS = (1, 3, 5, 10)
ALPHA_INTENT_THRESHOLD = 0.5
DEFAULT_METRIC_ALPHA = 0.5

GradeLookup = Callable[[int, str], int]


def dcg(grades: Sequence[int], k: int) -> float:
    """DCG@k with gain 2^g - 1 and discount log2(rank + 1)."""
    return sum(
        (2 ** g - 1) / math.log2(r + 1)
        for r, g in enumerate(grades[:k], start=1)
    )


def ndcg(grades: Sequence[int], k: int) -> float:
    """Graded NDCG@k; the ideal ordering is the full grade multiset sorted
    descending. Returns 0 when the ideal DCG is 0."""
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    ideal = dcg(sorted(grades, reverse=True), k)
    if ideal == 0.0:
        return 0.0
    return dcg(grades, k) / ideal


def ndcg_ia(
    intent_dist: dict[int, float],
    ranked_ids: Sequence[str],
    grade_of: GradeLookup,
    k: int,
) -> float:
    """Intent-aware NDCG: per-intent graded NDCG weighted by the intent
    probabilities. Weights are normalized by their sum so the score stays
    in [0,1] even when the probabilities sum above 1; intents with zero
    probability contribute nothing."""
    total_weight = sum(p for p in intent_dist.values() if p > 0.0)
    if total_weight == 0.0:
        return 0.0
    acc = 0.0
    for charge_id in sorted(intent_dist):
        p = intent_dist[charge_id]
        if p <= 0.0:
            continue
        grades = [grade_of(charge_id, doc_id) for doc_id in ranked_ids]
        acc += p * ndcg(grades, k)
    return acc / total_weight


def _alpha_relevance(
    intent_dist: dict[int, float],
    ranked_ids: Sequence[str],
    grade_of: GradeLookup,
) -> tuple[list[int], list[list[int]]]:
    """Surviving intents (P > 0.5) and the binarized relevance rows
    (grades 2,3 -> 1; 1,0 -> 0) for each ranked doc."""
    intents = sorted(c for c, p in intent_dist.items() if p > ALPHA_INTENT_THRESHOLD)
    rows = [
        [1 if grade_of(c, doc_id) >= 2 else 0 for c in intents]
        for doc_id in ranked_ids
    ]
    return intents, rows


def _alpha_dcg(order: Sequence[int], rows: list[list[int]], k: int, alpha: float) -> float:
    n_intents = len(rows[0]) if rows else 0
    seen = [0] * n_intents
    total = 0.0
    for rank, idx in enumerate(order[:k], start=1):
        gain = 0.0
        for i in range(n_intents):
            if rows[idx][i]:
                gain += (1.0 - alpha) ** seen[i]
                seen[i] += 1
        total += gain / math.log2(rank + 1)
    return total


def _greedy_ideal(rows: list[list[int]], k: int, alpha: float) -> float:
    """Greedy ideal alpha-DCG: at each rank pick the doc with the highest
    novelty-discounted gain (ties by index)."""
    n_intents = len(rows[0]) if rows else 0
    remaining = list(range(len(rows)))
    seen = [0] * n_intents
    total = 0.0
    for rank in range(1, min(k, len(rows)) + 1):
        best_idx, best_gain = None, -1.0
        for idx in remaining:
            gain = sum(
                (1.0 - alpha) ** seen[i] for i in range(n_intents) if rows[idx][i]
            )
            if gain > best_gain:
                best_idx, best_gain = idx, gain
        remaining.remove(best_idx)
        for i in range(n_intents):
            if rows[best_idx][i]:
                seen[i] += 1
        total += best_gain / math.log2(rank + 1)
    return total


def alpha_ndcg(
    intent_dist: dict[int, float],
    ranked_ids: Sequence[str],
    grade_of: GradeLookup,
    k: int,
    alpha: float = DEFAULT_METRIC_ALPHA,
) -> float:
    """alpha-NDCG@k over the intents whose probability clears 0.5, with
    four-level grades binarized at 2. Normalized by a greedily built ideal
    list; 0 when no relevant intent survives the filter."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0,1]")
    intents, rows = _alpha_relevance(intent_dist, ranked_ids, grade_of)
    if not intents:
        return 0.0
    ideal = _greedy_ideal(rows, k, alpha)
    if ideal == 0.0:
        return 0.0
    return _alpha_dcg(range(len(rows)), rows, k, alpha) / ideal


# ---------------------------------------------------------------------------
# Evaluation report


def evaluation_table(
    per_query: dict[str, dict[str, dict[str, float]]],
    cutoffs: Sequence[int] = EVAL_CUTOFFS,
) -> str:
    """TSV with one row per method and mean metric columns.

    ``per_query[method][query_id][column]`` holds the per-query values;
    columns are named ``N-IA@k`` and ``a-N@k``.
    """
    columns = [f"N-IA@{k}" for k in cutoffs] + [f"a-N@{k}" for k in cutoffs]
    lines = ["method\t" + "\t".join(columns)]
    for method in per_query:
        rows = per_query[method]
        means = [
            sum(rows[q][col] for q in rows) / len(rows) if rows else 0.0
            for col in columns
        ]
        lines.append(method + "\t" + "\t".join(f"{v:.4f}" for v in means))
    return "\n".join(lines) + "\n"


def pairwise_ttests(
    per_query: dict[str, dict[str, dict[str, float]]],
    cutoffs: Sequence[int] = EVAL_CUTOFFS,
) -> str:
    """Long-form TSV of paired t-test p-values between every method pair
    on every metric column."""
    columns = [f"N-IA@{k}" for k in cutoffs] + [f"a-N@{k}" for k in cutoffs]
    methods = list(per_query)
    lines = ["method_a\tmethod_b\tmetric\tp_value"]
    for i, a in enumerate(methods):
        for b in methods[i + 1 :]:
            shared = sorted(set(per_query[a]) & set(per_query[b]))
            for col in columns:
                xs = [per_query[a][q][col] for q in shared]
                ys = [per_query[b][q][col] for q in shared]
                if xs == ys:
                    p = 1.0
                else:
                    p = float(ttest_rel(xs, ys).pvalue)
                lines.append(f"{a}\t{b}\t{col}\t{p:.6g}")
    return "\n".join(lines) + "\n"
