"""Candidate charge sets, intent distributions, label aggregation,
triple filtering, and agreement statistics."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from divlex.annotation import (
    SortedPreference,
    agreement,
    agreement_tsv,
    aggregate_intent,
    candidate_charge_set,
    cohen_kappa,
    fleiss_kappa,
    intent_distribution,
    median_label,
    triple_needs_annotation,
)
from divlex.corpus import CandidateDoc, ChargeVocabulary, QueryCase
from divlex.errors import (
    EmptyInput,
    EmptyPreference,
    InsufficientAnnotators,
    MismatchedKeys,
)

VOCAB = ChargeVocabulary(tuple((i, f"charge-{i:02d}") for i in range(10)))


def _predictor(top5):
    return lambda text: [(cid, 1.0 - 0.1 * i) for i, cid in enumerate(top5)]


# -- candidate charge set -----------------------------------------------------


def test_ccs_unions_text_matches_with_predictor_top5():
    text = "the defendant faced charge-07 at trial."
    assert candidate_charge_set(text, VOCAB, _predictor([1, 2, 3, 4, 5])) == {1, 2, 3, 4, 5, 7}


def test_ccs_without_text_matches_is_predictor_top5():
    assert candidate_charge_set("nothing here", VOCAB, _predictor([1, 2, 3, 4, 5])) == {1, 2, 3, 4, 5}


def test_ccs_deduplicates_overlap():
    text = "involves charge-03 only"
    assert candidate_charge_set(text, VOCAB, _predictor([3, 1, 2, 4, 5])) == {1, 2, 3, 4, 5}


def test_ccs_uses_only_top_five_predictions():
    assert candidate_charge_set("x", VOCAB, _predictor([0, 1, 2, 3, 4, 5, 6])) == {0, 1, 2, 3, 4}


# -- intent distribution ------------------------------------------------------


def test_three_level_preference_maps_to_descending_thirds():
    pref = SortedPreference(
        (frozenset({2, 3}), frozenset({1}), frozenset({5, 6})), frozenset({4})
    )
    dist = intent_distribution(pref)
    assert dist == {
        2: 1.0,
        3: 1.0,
        1: pytest.approx(2 / 3),
        5: pytest.approx(1 / 3),
        6: pytest.approx(1 / 3),
        4: 0.0,
    }


def test_single_level_gives_everything_probability_one():
    dist = intent_distribution(SortedPreference((frozenset({1, 2, 3}),), frozenset()))
    assert dist == {1: 1.0, 2: 1.0, 3: 1.0}


def test_nothing_selected_gives_all_zero():
    dist = intent_distribution(SortedPreference((), frozenset({1, 2})))
    assert dist == {1: 0.0, 2: 0.0}


def test_empty_preference_is_rejected():
    with pytest.raises(EmptyPreference):
        intent_distribution(SortedPreference((), frozenset()))


def test_levels_must_be_disjoint():
    with pytest.raises(EmptyPreference):
        SortedPreference((frozenset({1}), frozenset({1})), frozenset())


@given(
    st.lists(st.integers(0, 30), min_size=1, max_size=12, unique=True),
    st.integers(1, 5),
    st.data(),
)
def test_intent_values_descend_in_steps_of_one_over_k(charges, n_levels, data):
    n_levels = min(n_levels, len(charges))
    cut = sorted(data.draw(st.sets(st.integers(1, len(charges) - 1), max_size=n_levels - 1))) if len(charges) > 1 else []
    bounds = [0, *cut, len(charges)]
    levels = tuple(
        frozenset(charges[a:b]) for a, b in zip(bounds, bounds[1:]) if b > a
    )
    dist = intent_distribution(SortedPreference(levels, frozenset()))
    k = len(levels)
    values = sorted(set(dist.values()))
    assert all(any(math.isclose(v, (k - j) / k) for j in range(k)) for v in values)
    # non-increasing with level index
    for j, level in enumerate(levels):
        for cid in level:
            assert math.isclose(dist[cid], (k - j) / k)


# -- aggregation --------------------------------------------------------------


def test_aggregate_is_the_arithmetic_mean():
    assert aggregate_intent([{1: 1.0}, {1: 0.0}]) == {1: 0.5}


def test_aggregate_single_annotator_is_identity():
    assert aggregate_intent([{1: 0.25, 2: 0.75}]) == {1: 0.25, 2: 0.75}


def test_aggregate_three_annotators_hand_value():
    got = aggregate_intent([{1: 1, 2: 0}, {1: 2 / 3, 2: 1 / 3}, {1: 1 / 3, 2: 2 / 3}])
    assert got[1] == pytest.approx(2 / 3)
    assert got[2] == pytest.approx(1 / 3)


def test_aggregate_rejects_mismatched_charge_sets():
    with pytest.raises(MismatchedKeys):
        aggregate_intent([{1: 1.0}, {2: 1.0}])


@given(st.dictionaries(st.integers(0, 9), st.floats(0, 1), min_size=1, max_size=5))
def test_aggregating_identical_distributions_is_identity(dist):
    out = aggregate_intent([dist, dist, dist])
    for cid, p in dist.items():
        assert out[cid] == pytest.approx(p)


# -- median -------------------------------------------------------------------


def test_median_odd_count():
    assert median_label([1, 2, 3]) == 2


def test_median_is_robust_to_outliers():
    assert median_label([0, 0, 3]) == 0


def test_median_even_count_takes_lower():
    assert median_label([2, 3]) == 2


def test_median_empty_rejected():
    with pytest.raises(EmptyInput):
        median_label([])


@given(st.lists(st.integers(0, 3), min_size=1, max_size=9), st.randoms())
def test_median_permutation_invariant_and_bounded(grades, rnd):
    value = median_label(grades)
    shuffled = grades[:]
    rnd.shuffle(shuffled)
    assert median_label(shuffled) == value
    assert min(grades) <= value <= max(grades)


# -- triple filter ------------------------------------------------------------


def _query(p):
    return QueryCase("q", ("s.",), frozenset({1}), {1: p})


def _doc(qrel, charges=frozenset({1})):
    return CandidateDoc("d", "q", ("s.",), charges, qrel)


def test_triple_selected_when_all_conditions_hold():
    assert triple_needs_annotation(_query(0.5), 1, _doc(2))


def test_zero_intent_probability_blocks_selection():
    assert not triple_needs_annotation(_query(0.0), 1, _doc(2))


def test_irrelevant_doc_blocks_selection():
    assert not triple_needs_annotation(_query(1.0), 1, _doc(0))


def test_missing_charge_blocks_selection():
    assert not triple_needs_annotation(_query(1.0), 1, _doc(2, frozenset({2})))


@given(st.floats(0, 1), st.integers(0, 3), st.booleans())
def test_filter_is_monotone_in_each_condition(p, qrel, has_charge):
    charges = frozenset({1}) if has_charge else frozenset({2})
    base = triple_needs_annotation(_query(p), 1, _doc(qrel, charges))
    # weakening any satisfied condition can only turn the result off
    assert not (
        base is False
        and triple_needs_annotation(_query(p), 1, _doc(qrel, charges)) is True
    )
    if base:
        assert p > 0 and qrel > 0 and has_charge


# -- agreement ----------------------------------------------------------------


def test_identical_annotators_have_perfect_agreement():
    labels = {"a": [0, 1, 2, 3, 1], "b": [0, 1, 2, 3, 1]}
    report = agreement(labels)
    assert report.pairwise_kappa[("a", "b")] == pytest.approx(1.0)
    assert report.pairwise_kendall_tau[("a", "b")] == pytest.approx(1.0)


def test_reversed_rankings_have_tau_minus_one():
    labels = {"a": [0, 1, 2, 3], "b": [3, 2, 1, 0]}
    report = agreement(labels)
    assert report.pairwise_kendall_tau[("a", "b")] == pytest.approx(-1.0)


def test_independent_looking_grades_have_zero_kappa():
    # observed agreement 0.5 equals chance agreement 0.5
    assert cohen_kappa([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0)


def test_kappa_is_symmetric():
    a, b = [0, 1, 2, 2, 3], [1, 1, 2, 0, 3]
    assert cohen_kappa(a, b) == pytest.approx(cohen_kappa(b, a))


def test_fleiss_kappa_perfect_agreement():
    assert fleiss_kappa({"a": [0, 1, 2], "b": [0, 1, 2], "c": [0, 1, 2]}) == pytest.approx(1.0)


def test_agreement_needs_two_annotators():
    with pytest.raises(InsufficientAnnotators):
        agreement({"a": [1, 2]})


def test_agreement_over_explicit_rankings():
    labels = {"a": [3, 2], "b": [3, 2]}
    rankings = {"a": [["d1", "d2", "d3"]], "b": [["d3", "d2", "d1"]]}
    report = agreement(labels, rankings)
    assert report.pairwise_kendall_tau[("a", "b")] == pytest.approx(-1.0)


def test_agreement_tsv_lists_all_measures():
    report = agreement({"a": [0, 1], "b": [0, 1]})
    text = agreement_tsv(report)
    assert "kappa\ta\tb\t1.0000" in text
    assert "kendall_tau\ta\tb\t1.0000" in text
    assert "fleiss_kappa" in text
