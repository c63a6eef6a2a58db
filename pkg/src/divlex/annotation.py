"""Dataset-construction math: candidate charge sets, intent distributions
from sorted annotator preferences, label aggregation, triple filtering,
and inter-annotator agreement statistics."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from scipy.stats import kendalltau

from .corpus import CandidateDoc, ChargeVocabulary, QueryCase
from .errors import (
    EmptyInput,
    EmptyPreference,
    InsufficientAnnotators,
    MismatchedKeys,
)


@dataclass(frozen=True)
class SortedPreference:
    """An annotator's select-and-sort output over a query's candidate
    charge set: ordered relevance levels (best first) plus the charges
    the annotator left unselected."""

    levels: tuple[frozenset[int], ...]
    unselected: frozenset[int]

    def __post_init__(self):
        seen: set[int] = set()
        for level in self.levels:
            if not level:
                raise EmptyPreference("empty relevance level")
            if level & seen:
                raise EmptyPreference("levels must be pairwise disjoint")
            seen |= level
        if seen & self.unselected:
            raise EmptyPreference("unselected charges overlap a level")


@dataclass(frozen=True)
class AgreementReport:
    pairwise_kappa: dict[tuple[str, str], float]
    pairwise_kendall_tau: dict[tuple[str, str], float]
    fleiss_kappa: float


def candidate_charge_set(text: str, vocab: ChargeVocabulary, predictor) -> set[int]:
    """CCS = charges whose names literally occur in the text, merged with
    the predictor's top-5 charges.

    ``predictor`` maps text to a descending list of (charge_id, prob) of
    length >= 5; failures propagate as PredictorUnavailable.
    """
    found = {
        cid
        for cid, name in vocab.charges
        if re.search(re.escape(name), text)
    }
    top5 = {cid for cid, _ in predictor(text)[:5]}
    return found | top5


def intent_distribution(pref: SortedPreference) -> dict[int, float]:
    """Map a sorted preference to intent probabilities: with k levels the
    best level gets 1, values descend uniformly by 1/k, unselected gets 0."""
    if not pref.levels and not pref.unselected:
        raise EmptyPreference("preference covers no charges")
    k = len(pref.levels)
    dist = {cid: 0.0 for cid in pref.unselected}
    for j, level in enumerate(pref.levels):
        value = (k - j) / k
        for cid in level:
            dist[cid] = value
    return dist


def aggregate_intent(dists: list[dict[int, float]]) -> dict[int, float]:
    """Arithmetic mean of per-annotator intent distributions."""
    if not dists:
        raise EmptyInput("no distributions to aggregate")
    keys = set(dists[0])
    for d in dists[1:]:
        if set(d) != keys:
            raise MismatchedKeys(f"key sets differ: {sorted(keys)} vs {sorted(d)}")
    return {cid: sum(d[cid] for d in dists) / len(dists) for cid in sorted(keys)}


def median_label(grades: list[int]) -> int:
    """Lower median: keeps even-count aggregates on the integer grade scale."""
    if not grades:
        raise EmptyInput("no grades")
    ordered = sorted(grades)
    return ordered[(len(ordered) - 1) // 2]


def triple_needs_annotation(q: QueryCase, charge_id: int, d: CandidateDoc) -> bool:
    """A (query, charge, doc) triple goes to annotators only when the intent
    probability is positive, the doc is relevant to the query, and the doc
    carries the charge."""
    return (
        q.intent_dist.get(charge_id, 0.0) > 0.0
        and d.query_relevance > 0
        and charge_id in d.charges
    )


def cohen_kappa(a: list[int], b: list[int]) -> float:
    if len(a) != len(b) or not a:
        raise EmptyInput("grade vectors must be non-empty and aligned")
    n = len(a)
    categories = sorted(set(a) | set(b))
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    expected = sum(
        (a.count(c) / n) * (b.count(c) / n) for c in categories
    )
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


def fleiss_kappa(labels_by_annotator: dict[str, list[int]]) -> float:
    """Group-level chance-corrected agreement over categorical grades."""
    rows = list(labels_by_annotator.values())
    n_items = len(rows[0])
    n_raters = len(rows)
    categories = sorted({g for row in rows for g in row})
    counts = [[0] * len(categories) for _ in range(n_items)]
    cat_index = {c: i for i, c in enumerate(categories)}
    for row in rows:
        for item, grade in enumerate(row):
            counts[item][cat_index[grade]] += 1
    p_bar = sum(
        (sum(c * c for c in item_counts) - n_raters) / (n_raters * (n_raters - 1))
        for item_counts in counts
    ) / n_items
    p_e = sum(
        (sum(counts[i][j] for i in range(n_items)) / (n_items * n_raters)) ** 2
        for j in range(len(categories))
    )
    if p_e == 1.0:
        return 1.0 if p_bar == 1.0 else 0.0
    return (p_bar - p_e) / (1.0 - p_e)


def agreement(
    labels_by_annotator: dict[str, list[int]],
    rankings_by_annotator: dict[str, list[list[str]]] | None = None,
) -> AgreementReport:
    """Pairwise Cohen's kappa over shared graded items and pairwise
    Kendall's tau-b over per-query orderings, plus a group Fleiss kappa.

    ``rankings_by_annotator`` holds, per annotator, one ordering (list of
    item ids, best first) per query; tau-b is averaged over queries.
    Defaults to the grade vectors ordered as rankings when omitted.
    """
    annotators = sorted(labels_by_annotator)
    if len(annotators) < 2:
        raise InsufficientAnnotators("need at least two annotators")
    n_items = {len(v) for v in labels_by_annotator.values()}
    if len(n_items) != 1:
        raise MismatchedKeys("annotators grade different item counts")

    kappas: dict[tuple[str, str], float] = {}
    taus: dict[tuple[str, str], float] = {}
    for a, b in itertools.combinations(annotators, 2):
        kappas[(a, b)] = kappas[(b, a)] = cohen_kappa(
            labels_by_annotator[a], labels_by_annotator[b]
        )
        if rankings_by_annotator is not None:
            vals = []
            for ra, rb in zip(rankings_by_annotator[a], rankings_by_annotator[b]):
                pos_b = {item: i for i, item in enumerate(rb)}
                tau, _ = kendalltau(list(range(len(ra))), [pos_b[x] for x in ra])
                vals.append(tau)
            taus[(a, b)] = taus[(b, a)] = sum(vals) / len(vals)
        else:
            tau, _ = kendalltau(labels_by_annotator[a], labels_by_annotator[b])
            taus[(a, b)] = taus[(b, a)] = tau

    return AgreementReport(kappas, taus, fleiss_kappa(labels_by_annotator))


def agreement_tsv(report: AgreementReport) -> str:
    """TSV layout: measure, annotator pair, value."""
    lines = ["measure\tannotator_a\tannotator_b\tvalue"]
    seen = set()
    for (a, b), v in sorted(report.pairwise_kappa.items()):
        if (b, a) in seen:
            continue
        seen.add((a, b))
        lines.append(f"kappa\t{a}\t{b}\t{v:.4f}")
    seen = set()
    for (a, b), v in sorted(report.pairwise_kendall_tau.items()):
        if (b, a) in seen:
            continue
        seen.add((a, b))
        lines.append(f"kendall_tau\t{a}\t{b}\t{v:.4f}")
    lines.append(f"fleiss_kappa\t-\t-\t{report.fleiss_kappa:.4f}")
    return "\n".join(lines) + "\n"
