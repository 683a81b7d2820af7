import numpy as np
import pytest

from topicalign import (
    AlignmentGraph,
    GibbsConfig,
    LdaHyperparams,
    LdaSimSpec,
    SeededRng,
    TopicAlignment,
    TopicModel,
    align_ensemble,
    crossing_objective,
    fit_ensemble,
    lp_oracle,
    normalize,
    product_weights,
    reorder_topics,
    sim_lda,
    transport_weights,
)
from topicalign.errors import InvalidConfig, SampleCountMismatch
from topicalign.transport import TransportProblem


def toy_model(beta_cols, gamma_rows):
    beta = np.array(beta_cols, dtype=float).T
    gamma = np.array(gamma_rows, dtype=float)
    return TopicModel(LdaHyperparams(beta.shape[1], 0.5, 0.1), beta, gamma, [])


@pytest.fixture(scope="module")
def small_ensemble():
    spec = LdaSimSpec(n_samples=40, n_features=30, n_topics=3, doc_total=200,
                      rng=SeededRng(11))
    counts = sim_lda(spec).counts
    cfg = GibbsConfig(burn_in=40, samples=10, thin=1, rng=SeededRng(12))
    return fit_ensemble(counts, range(2, 5), 0.5, 0.1, cfg)


class TestProductWeights:
    def test_hard_clustering_reduction(self):
        gamma = np.array([[1, 0], [1, 0], [0, 1]], dtype=float)
        w = product_weights(gamma, gamma)
        assert np.array_equal(w, [[2, 0], [0, 1]])

    def test_single_topic_gives_column_sums(self):
        gamma_m = np.ones((4, 1))
        gamma_m2 = np.array([[0.2, 0.8], [0.5, 0.5], [1.0, 0.0], [0.3, 0.7]])
        w = product_weights(gamma_m, gamma_m2)
        assert w == pytest.approx(gamma_m2.sum(axis=0)[None, :])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        gamma_m = rng.dirichlet(np.ones(2), size=4)
        gamma_m2 = rng.dirichlet(np.ones(3), size=4)
        w = product_weights(gamma_m, gamma_m2)
        expected = np.zeros((2, 3))
        for k in range(2):
            for k2 in range(3):
                for i in range(4):
                    expected[k, k2] += gamma_m[i, k] * gamma_m2[i, k2]
        assert w == pytest.approx(expected, abs=1e-12)

    def test_total_bounded_by_n(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            gamma_m = rng.dirichlet(np.full(3, 0.4), size=17)
            gamma_m2 = rng.dirichlet(np.full(5, 0.4), size=17)
            assert product_weights(gamma_m, gamma_m2).sum() <= 17 + 1e-9

    def test_matched_mass_maximal_iff_identical_one_hot(self):
        # For equal-K pairs the per-sample inner product sum (the trace of W)
        # is at most N by Cauchy-Schwarz, with equality only for identical
        # one-hot memberships.
        one_hot = np.eye(3)[np.array([0, 1, 2, 0])]
        assert np.trace(product_weights(one_hot, one_hot)) == pytest.approx(4.0)
        soft = np.full((4, 3), 1 / 3)
        assert np.trace(product_weights(soft, soft)) < 4.0 - 1e-6
        rng = np.random.default_rng(8)
        gamma = rng.dirichlet(np.ones(3), size=6)
        gamma2 = rng.dirichlet(np.ones(3), size=6)
        assert np.trace(product_weights(gamma, gamma2)) <= 6 + 1e-9

    def test_sample_count_mismatch(self):
        with pytest.raises(SampleCountMismatch):
            product_weights(np.ones((3, 1)), np.ones((4, 1)))


class TestTransportWeights:
    def test_self_alignment_is_diagonal(self):
        rng = np.random.default_rng(2)
        beta = rng.dirichlet(np.full(12, 0.2), size=3).T
        gamma = rng.dirichlet(np.ones(3), size=9)
        model = TopicModel(LdaHyperparams(3, 0.5, 0.1), beta, gamma, [])
        w = transport_weights(model, model)
        assert w == pytest.approx(np.diag(model.topic_masses), abs=1e-9)

    def test_single_source_ships_everything(self):
        m1 = toy_model([[0.5, 0.3, 0.2]], np.ones((6, 1)))
        rng = np.random.default_rng(3)
        gamma2 = rng.dirichlet(np.ones(3), size=6)
        m2 = toy_model(rng.dirichlet(np.ones(3), size=3), gamma2)
        w = transport_weights(m1, m2)
        assert w == pytest.approx(m2.topic_masses[None, :], abs=1e-9)

    def test_matches_lp_oracle_on_toy(self):
        m1 = toy_model([[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]],
                       [[0.9, 0.1], [0.8, 0.2], [0.2, 0.8], [0.1, 0.9]])
        m2 = toy_model([[0.6, 0.3, 0.1], [0.1, 0.3, 0.6], [0.3, 0.4, 0.3]],
                       [[0.5, 0.3, 0.2], [0.4, 0.4, 0.2], [0.1, 0.6, 0.3], [0.2, 0.2, 0.6]])
        w = transport_weights(m1, m2)
        from topicalign.measures import jsd
        cost = np.array([[jsd(m1.beta[:, a], m2.beta[:, b]) for b in range(3)]
                         for a in range(2)])
        oracle = lp_oracle(TransportProblem(m1.topic_masses, m2.topic_masses, cost))
        assert float((cost * w).sum()) == pytest.approx(oracle, abs=1e-9)
        assert w.sum(axis=1) == pytest.approx(m1.topic_masses, abs=1e-8)
        assert w.sum(axis=0) == pytest.approx(m2.topic_masses, abs=1e-8)


class TestNormalize:
    def test_uniform(self):
        w_out, w_in = normalize(np.ones((2, 2)))
        assert w_out == pytest.approx(np.full((2, 2), 0.5))
        assert w_in == pytest.approx(np.full((2, 2), 0.5))

    def test_diagonal(self):
        w_out, w_in = normalize(np.diag([2.0, 3.0]))
        assert w_out == pytest.approx(np.eye(2))
        assert w_in == pytest.approx(np.eye(2))

    def test_hand_computed(self):
        w_out, w_in = normalize(np.array([[1.0, 3.0], [0.0, 2.0]]))
        assert w_out == pytest.approx(np.array([[0.25, 0.75], [0.0, 1.0]]))
        assert w_in == pytest.approx(np.array([[1.0, 0.6], [0.0, 0.4]]))

    def test_zero_rows_stay_zero(self):
        w_out, w_in = normalize(np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert np.array_equal(w_out[0], [0.0, 0.0])
        assert w_in == pytest.approx(np.array([[0.0, 0.0], [1.0, 1.0]]))

    def test_idempotent_on_rows(self):
        rng = np.random.default_rng(4)
        w = rng.random((3, 5))
        w_out, _ = normalize(w)
        again, _ = normalize(w_out)
        assert again == pytest.approx(w_out, abs=1e-12)


class TestAlignEnsemble:
    def test_single_model_has_no_edges(self, small_ensemble):
        graph = align_ensemble([small_ensemble[0]], "product")
        assert graph.ks == (2,)
        assert graph.weights == {}
        assert len(graph.nodes()) == 2

    def test_three_models_three_pairs(self, small_ensemble):
        graph = align_ensemble(small_ensemble, "product")
        assert graph.pairs() == [(0, 1), (0, 2), (1, 2)]

    def test_duplicated_models_dominant_diagonal(self, small_ensemble):
        model = small_ensemble[1]
        for method in ("product", "transport"):
            graph = align_ensemble([model, model], method)
            w = graph.weights[(0, 1)]
            assert np.array_equal(np.argmax(w, axis=1), np.arange(3)), method

    def test_transport_marginals_match_masses(self, small_ensemble):
        graph = align_ensemble(small_ensemble, "transport")
        n = small_ensemble[0].n_samples
        for (m, m2), w in graph.weights.items():
            assert w.sum(axis=1) == pytest.approx(
                small_ensemble[m].topic_masses, abs=1e-6 * n)
            assert w.sum(axis=0) == pytest.approx(
                small_ensemble[m2].topic_masses, abs=1e-6 * n)

    def test_mass_per_model_sums_to_n(self, small_ensemble):
        graph = align_ensemble(small_ensemble, "product")
        n = small_ensemble[0].n_samples
        for masses in graph.masses:
            assert masses.sum() == pytest.approx(n, abs=1e-6 * n)

    def test_unknown_method(self, small_ensemble):
        with pytest.raises(InvalidConfig):
            align_ensemble(small_ensemble, "sinkhorn")

    def test_deterministic(self, small_ensemble):
        a = align_ensemble(small_ensemble, "transport")
        b = align_ensemble(small_ensemble, "transport")
        for pair in a.pairs():
            assert np.array_equal(a.weights[pair], b.weights[pair])


class TestReorder:
    def test_sorted_chain_is_fixed_point(self):
        eye = np.eye(3)
        graph = AlignmentGraph.from_weights({(0, 1): eye, (1, 2): eye, (0, 2): eye})
        result = reorder_topics(graph)
        for perm in result.permutations:
            assert np.array_equal(perm, np.arange(3))
        assert result.objective_before == result.objective_after == 0.0

    def test_antidiagonal_reverses_second_model(self):
        graph = AlignmentGraph.from_weights({(0, 1): np.fliplr(np.eye(3))})
        result = reorder_topics(graph)
        assert np.array_equal(result.permutations[0], [0, 1, 2])
        assert np.array_equal(result.permutations[1], [2, 1, 0])
        assert result.objective_after == 0.0

    def test_never_worsens_on_random_graphs(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            ks = sorted(rng.choice(np.arange(2, 6), size=3, replace=False))
            weights = {(m, m2): rng.random((ks[m], ks[m2]))
                       for m in range(3) for m2 in range(m + 1, 3)}
            graph = AlignmentGraph.from_weights(weights)
            result = reorder_topics(graph)
            assert result.objective_after <= result.objective_before + 1e-12

    def test_permutations_are_valid(self, small_ensemble):
        graph = align_ensemble(small_ensemble, "product")
        result = reorder_topics(graph)
        for m, perm in enumerate(result.permutations):
            assert sorted(perm.tolist()) == list(range(graph.ks[m]))

    def test_crossing_objective_hand_case(self):
        graph = AlignmentGraph.from_weights({(0, 1): np.array([[0.0, 1.0], [1.0, 0.0]])})
        # identity display order: both edges cross one slot
        assert crossing_objective(graph, [np.arange(2), np.arange(2)]) == 2.0


class TestTopicAlignmentEstimator:
    def test_fit_exposes_scores(self, small_ensemble):
        est = TopicAlignment(method="product").fit(small_ensemble)
        graph = est.graph_
        assert set(est.coherence_) == set(graph.nodes())
        finest = graph.n_models - 1
        assert all(node[0] < finest for node in est.refinement_)
        assert est.n_paths_[finest] == graph.ks[finest]

    def test_get_params_round_trip(self):
        est = TopicAlignment(method="transport", reorder=False)
        assert est.get_params() == {"method": "transport", "reorder": False}

    def test_diagnostics_invariant_under_reordering(self, small_ensemble):
        plain = TopicAlignment(method="product", reorder=False).fit(small_ensemble)
        shuffled = TopicAlignment(method="product", reorder=True).fit(small_ensemble)
        assert plain.coherence_ == shuffled.coherence_
        assert plain.refinement_ == shuffled.refinement_
        assert plain.paths_.path_of == shuffled.paths_.path_of

    def test_topic_table_rows(self, small_ensemble):
        est = TopicAlignment(method="product").fit(small_ensemble)
        rows = est.topic_table()
        assert len(rows) == sum(est.graph_.ks)
        finest_rows = [r for r in rows if r["model"] == est.graph_.n_models - 1]
        assert all(r["refinement"] is None for r in finest_rows)
