"""Reversal graph construction, random-walk propagation, charge
distribution initialization, and Kronecker fusion."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divlex.chargegraph import (
    build_graph,
    dump_graph_tsv,
    init_doc_dist,
    init_query_dist,
    kron_feature,
    load_graph_tsv,
    reversal_matrix,
    rwog,
)
from divlex.corpus import GeneratorConfig, generate_synthetic
from divlex.errors import AllZero, DimensionMismatch, NegativeFrequency, NoCharges


def _random_g(rng, s):
    g = rng.integers(0, 5, size=(s, s))
    np.fill_diagonal(g, 0)
    return g


# -- transition weights -------------------------------------------------------


def test_charge_never_reversed_keeps_all_mass():
    g = np.zeros((3, 3))
    e = build_graph(g, 0.4).transitions
    assert e == pytest.approx(np.eye(3))


def test_offdiagonal_frequencies_share_the_leak_proportionally():
    g = np.array([[0, 3, 1], [0, 0, 0], [0, 0, 0]])
    e = build_graph(g, 0.4).transitions
    assert e[0] == pytest.approx([0.4, 0.45, 0.15])


def test_alpha_one_gives_identity_rows():
    g = np.array([[0, 5], [2, 0]])
    e = build_graph(g, 1.0).transitions
    assert e == pytest.approx(np.eye(2))


def test_self_reversals_alone_count_as_no_reversals():
    g = np.array([[7, 0], [0, 0]])
    e = build_graph(g, 0.4).transitions
    assert e == pytest.approx(np.eye(2))


def test_negative_frequency_rejected():
    with pytest.raises(NegativeFrequency):
        build_graph(np.array([[0, -1], [0, 0]]), 0.4)
    with pytest.raises(NegativeFrequency):
        reversal_matrix(2, [(0, 1, -3)])


def test_reversal_matrix_accumulates_duplicates():
    g = reversal_matrix(2, [(0, 1, 2), (0, 1, 3)])
    assert g[0, 1] == 5


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 8), st.floats(0, 1))
def test_every_transition_row_sums_to_one(seed, s, alpha):
    rng = np.random.default_rng(seed)
    e = build_graph(_random_g(rng, s), alpha).transitions
    assert e.sum(axis=1) == pytest.approx(np.ones(s), abs=1e-9)
    assert np.all(e >= 0)


# -- random walk --------------------------------------------------------------


def test_walk_on_identity_graph_is_a_fixed_point():
    graph = build_graph(np.zeros((4, 4)), 0.4)
    p0 = np.array([0.1, 0.2, 0.3, 0.4])
    assert rwog(p0, graph, 5) == pytest.approx(p0)


def test_single_edge_one_step_splits_alpha_wise():
    graph = build_graph(np.array([[0, 9], [0, 0]]), 0.4)
    assert rwog(np.array([1.0, 0.0]), graph, 1) == pytest.approx([0.4, 0.6])


def test_single_edge_two_steps_compounds():
    graph = build_graph(np.array([[0, 9], [0, 0]]), 0.4)
    assert rwog(np.array([1.0, 0.0]), graph, 2) == pytest.approx([0.16, 0.84])


def test_walk_rejects_wrong_dimension():
    graph = build_graph(np.zeros((3, 3)), 0.4)
    with pytest.raises(DimensionMismatch):
        rwog(np.ones(2) / 2, graph, 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 8), st.integers(0, 4))
def test_walk_preserves_mass_every_step(seed, s, steps):
    rng = np.random.default_rng(seed)
    graph = build_graph(_random_g(rng, s), 0.4)
    p = rng.random(s)
    p /= p.sum()
    for _ in range(steps):
        nxt = rwog(p, graph, 1)
        assert nxt.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(nxt >= -1e-12)
        p = nxt


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3), st.integers(0, 3))
def test_walk_steps_compose(seed, a, b):
    rng = np.random.default_rng(seed)
    graph = build_graph(_random_g(rng, 6), 0.4)
    p = rng.random(6)
    p /= p.sum()
    assert rwog(p, graph, a + b) == pytest.approx(rwog(rwog(p, graph, a), graph, b))


def test_planted_pair_attracts_more_walk_mass_than_bystanders():
    ds = generate_synthetic(GeneratorConfig(n_charges=12, n_train_queries=4, n_test_queries=2), seed=9)
    g = reversal_matrix(ds.vocab.size, ds.reversals)
    graph = build_graph(g, 0.4)
    for a in range(0, ds.vocab.size, 2):
        partner = a + 1
        p = np.zeros(ds.vocab.size)
        p[a] = 1.0
        walked = rwog(p, graph, 2)
        explicit = np.linalg.matrix_power(graph.transitions.T, 2) @ p
        assert walked == pytest.approx(explicit, abs=1e-12)
        for k in range(ds.vocab.size):
            if k in (a, partner):
                continue
            assert walked[partner] > walked[k]


# -- distribution initialization ----------------------------------------------


def test_query_distribution_boosts_top5_then_normalizes():
    scores = {0: 0.4, 1: 0.1, 2: 0.0, 3: 0.0, 4: 0.0}
    p = init_query_dist({0, 1, 2, 3, 4}, scores, size=6)
    assert p == pytest.approx([0.35, 0.2, 0.15, 0.15, 0.15, 0.0])


def test_uniform_top5_gives_uniform_fifths():
    scores = {i: 0.2 for i in range(5)}
    p = init_query_dist(set(range(5)), scores, size=6)
    assert p == pytest.approx([0.2] * 5 + [0.0])


def test_charge_outside_top5_with_zero_score_stays_zero():
    scores = {i: 0.2 for i in range(5)}
    scores[7] = 0.0
    p = init_query_dist(set(range(5)) | {7}, scores, size=8)
    assert p[7] == 0.0


def test_empty_candidate_set_rejected():
    with pytest.raises(NoCharges):
        init_query_dist(set(), {0: 1.0}, size=4)


def test_all_zero_distribution_rejected():
    with pytest.raises(AllZero):
        init_query_dist({0}, {}, size=2, boost=0.0)


def test_doc_distribution_is_uniform_over_charges():
    assert init_doc_dist({3}, 5) == pytest.approx([0, 0, 0, 1.0, 0])
    assert init_doc_dist({1, 2}, 4) == pytest.approx([0, 0.5, 0.5, 0])
    with pytest.raises(NoCharges):
        init_doc_dist(set(), 4)


# -- Kronecker fusion ---------------------------------------------------------


def test_kron_matches_definition():
    assert kron_feature(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == pytest.approx(
        [0.5, 0.0, 0.5, 0.0]
    )


def test_kron_of_one_hots_is_one_hot():
    cq = np.zeros(4)
    cq[1] = 1.0
    cd = np.zeros(4)
    cd[2] = 1.0
    out = kron_feature(cq, cd)
    assert out[1 * 4 + 2] == 1.0
    assert out.sum() == pytest.approx(1.0)


def test_kron_rejects_mismatched_sizes():
    with pytest.raises(DimensionMismatch):
        kron_feature(np.ones(2), np.ones(3))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6))
def test_kron_equals_double_loop_and_sums_to_one(seed, s):
    rng = np.random.default_rng(seed)
    cq = rng.random(s)
    cq /= cq.sum()
    cd = rng.random(s)
    cd /= cd.sum()
    out = kron_feature(cq, cd)
    for i in range(s):
        for j in range(s):
            assert out[i * s + j] == pytest.approx(cq[i] * cd[j])
    assert out.sum() == pytest.approx(1.0)


# -- serialization ------------------------------------------------------------


def test_graph_round_trips_through_sparse_dump():
    g = np.array([[0, 3, 1], [0, 0, 2], [0, 0, 0]])
    graph = build_graph(g, 0.4)
    loaded = load_graph_tsv(dump_graph_tsv(graph))
    assert loaded.alpha == graph.alpha
    assert loaded.transitions == pytest.approx(graph.transitions)
