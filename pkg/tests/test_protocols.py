import numpy as np
import pytest

from trimgossip.data import Dataset, TrimSpec, range_dataset, true_ranks, weight
from trimgossip.engine import EdgeSampler, TrialRecorder, run_trial, trial_rng
from trimgossip.errors import CompositionError, ParameterError
from trimgossip.graphs import TopologySpec, build_graph
from trimgossip.metrics import expected_average_oracle
from trimgossip.protocols import (
    AsyncGoRank,
    BaselinePP,
    TokenBaseline,
    ClippedGossip,
    GoRank,
    GossipAverage,
    GoTrim,
    OracleRanker,
    SizeEstimation,
    make_protocol,
)


class TestGoRank:
    def test_hand_trace_two_rounds(self, k3, dataset123):
        p = GoRank()
        st = p.init_state(k3, dataset123)
        p.local_phase(st, 1)
        assert np.array_equal(st.comp, [0.0, 0.0, 0.0])
        assert np.array_equal(st.rank, [1.0, 1.0, 1.0])
        p.edge_phase(st, 0, 1, 1)
        p.local_phase(st, 2)
        assert np.array_equal(st.rank, [1.0, 2.5, 1.0])

    def test_min_holder_rank_stays_one(self):
        g = build_graph(TopologySpec("watts_strogatz", 20, k=4, p=0.3, seed=2))
        d = range_dataset(20)
        rec = TrialRecorder([1, 10, 100, 1000])
        traj = run_trial(GoRank(), g, d, 1000, rec, seed=5)
        assert (traj.series["rank"][:, 0] == 1.0).all()

    def test_rank_bounds_and_multiset_conservation(self, k5):
        d = range_dataset(5)
        p = GoRank()
        st = p.init_state(k5, d)
        rng = np.random.default_rng(0)
        for s in range(1, 200):
            p.local_phase(st, s)
            i, j = k5.edges[rng.integers(0, k5.num_edges)]
            p.edge_phase(st, int(i), int(j), s)
            assert np.array_equal(np.sort(st.aux), d.values)
            assert ((st.rank >= 1.0) & (st.rank <= 6.0)).all()

    def test_max_holder_comp_is_win_fraction(self, k3):
        # the max-holder wins every comparison except against its own value,
        # so comp equals the running fraction of rounds spent hosting others
        d = Dataset(values=[1.0, 2.0, 3.0])
        p = GoRank()
        st = p.init_state(k3, d)
        wins = 0
        rng = np.random.default_rng(4)
        for s in range(1, 200):
            wins += st.values[2] > st.aux[2]
            p.local_phase(st, s)
            assert st.comp[2] == pytest.approx(wins / s)
            i, j = k3.edges[rng.integers(0, 3)]
            p.edge_phase(st, int(i), int(j), s)


class TestAsyncGoRank:
    def test_first_activation_self_comparison(self, single_edge):
        p = AsyncGoRank()
        st = p.init_state(single_edge, Dataset(values=[1.0, 2.0]))
        p.edge_phase(st, 0, 1, 1)
        # both endpoints updated against their own value, then swapped
        assert np.array_equal(st.counts, [1, 1])
        assert np.array_equal(st.rank, [1.0, 1.0])
        assert np.array_equal(st.aux, [2.0, 1.0])

    def test_second_round_uses_pre_swap_aux(self, single_edge):
        p = AsyncGoRank()
        st = p.init_state(single_edge, Dataset(values=[1.0, 2.0]))
        p.edge_phase(st, 0, 1, 1)
        p.edge_phase(st, 0, 1, 2)
        # node 1: holds aux=1 from the swap, wins the comparison once in two updates
        assert st.rank[1] == pytest.approx(2.0)
        assert st.rank[0] == pytest.approx(1.0)

    def test_unsampled_node_untouched(self, k3, dataset123):
        p = AsyncGoRank()
        st = p.init_state(k3, dataset123)
        p.edge_phase(st, 0, 1, 1)
        assert st.counts[2] == 0
        assert st.rank[2] == 1.0 and st.comp[2] == 0.0


class TestTokenBaseline:
    def test_discordant_local_swap(self, single_edge):
        p = TokenBaseline()
        st = p.init_state(single_edge, Dataset(values=[2.0, 1.0]))
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.rank, [2, 1])

    def test_concordant_pair_unchanged(self, single_edge):
        p = TokenBaseline()
        st = p.init_state(single_edge, Dataset(values=[1.0, 2.0]))
        before = st.rank.copy()
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.rank, before)

    def test_traveling_id_homecoming_overwrites(self, single_edge):
        p = TokenBaseline()
        st = p.init_state(single_edge, Dataset(values=[2.0, 1.0]))
        p.edge_phase(st, 0, 1, 1)  # tokens travel
        p.edge_phase(st, 0, 1, 2)  # tokens return home
        assert np.array_equal(st.tok_id, [0, 1])
        assert np.array_equal(st.rank, [2, 1])  # exact ranking reached

    def test_token_multisets_conserved_ranks_in_range(self):
        # The traveling (id, rank, value) triples are permuted, never created or
        # destroyed. Local ranks stay valid rank values but can transiently
        # duplicate: a homecoming token may overwrite a rank another node still
        # holds. Only the limit is an exact permutation.
        g = build_graph(TopologySpec("watts_strogatz", 10, k=4, p=0.3, seed=7))
        d = Dataset(values=np.random.default_rng(3).permutation(10).astype(float) + 1)
        p = TokenBaseline()
        st = p.init_state(g, d)
        rng = np.random.default_rng(8)
        ident = np.arange(1, 11)
        for s in range(1, 2000):
            i, j = g.edges[rng.integers(0, g.num_edges)]
            p.edge_phase(st, int(i), int(j), s)
            assert ((st.rank >= 1) & (st.rank <= 10)).all()
            assert np.array_equal(np.sort(st.tok_rank), ident)
            assert np.array_equal(np.sort(st.tok_id), np.arange(10))
            assert np.array_equal(np.sort(st.tok_val), np.sort(d.values))

    def test_reaches_exact_ranking(self):
        g = build_graph(TopologySpec("complete", 10))
        d = Dataset(values=np.random.default_rng(5).permutation(10).astype(float))
        p = TokenBaseline()
        st = p.init_state(g, d)
        ei, ej = EdgeSampler(g, trial_rng(1, 0)).endpoints(100_000)
        hit = p.run_until_exact(st, ei, ej, true_ranks(d).astype(np.int64))
        assert hit > 0


class TestBaselinePP:
    def test_aux_discordance_swap(self, single_edge):
        p = BaselinePP()
        st = p.init_state(single_edge, Dataset(values=[5.0, 3.0]))
        p.edge_phase(st, 0, 1, 1)
        # aux ranks swapped for discordance, then adopted where the local pair
        # is discordant or the own observation returned, then aux pair swapped
        assert np.array_equal(st.rank, [2, 1])

    def test_own_observation_return_adopts_aux_rank(self, single_edge):
        p = BaselinePP()
        st = p.init_state(single_edge, Dataset(values=[3.0, 5.0]))
        p.edge_phase(st, 0, 1, 1)  # swaps aux values away
        p.edge_phase(st, 0, 1, 2)  # brings each aux value home: X'_p == X_p
        assert np.array_equal(st.rank, [1, 2])

    def test_sorted_pair_only_swaps_aux(self, single_edge):
        p = BaselinePP()
        st = p.init_state(single_edge, Dataset(values=[3.0, 5.0]))
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.rank, [1, 2])
        assert np.array_equal(st.aux_val, [5.0, 3.0])
        assert np.array_equal(st.aux_rank, [2, 1])

    def test_aux_multiset_conserved_ranks_in_range(self):
        g = build_graph(TopologySpec("kregular", 10, degree=3, seed=1))
        d = Dataset(values=np.random.default_rng(9).normal(size=10))
        p = BaselinePP()
        st = p.init_state(g, d)
        rng = np.random.default_rng(10)
        for s in range(1, 2000):
            i, j = g.edges[rng.integers(0, g.num_edges)]
            p.edge_phase(st, int(i), int(j), s)
            assert ((st.rank >= 1) & (st.rank <= 10)).all()
            assert np.array_equal(np.sort(st.aux_rank), np.arange(1, 11))
            assert np.array_equal(np.sort(st.aux_val), np.sort(d.values))

    def test_reaches_exact_ranking(self):
        g = build_graph(TopologySpec("complete", 10))
        d = Dataset(values=np.random.default_rng(6).permutation(10).astype(float))
        p = BaselinePP()
        st = p.init_state(g, d)
        ei, ej = EdgeSampler(g, trial_rng(2, 0)).endpoints(100_000)
        hit = p.run_until_exact(st, ei, ej, true_ranks(d).astype(np.int64))
        assert hit > 0


class TestGoTrim:
    def test_injection_formula(self, k5):
        d = Dataset(values=[3.0, 1.0, 2.0, 4.0, 5.0])
        trim = TrimSpec(alpha=0.2, n=5)
        p = GoTrim(trim, OracleRanker())
        st = p.init_state(k5, d)
        p.local_phase(st, 1)
        # node 0 has rank 3 inside [1.5, 4.5]: weight 0 -> 5/3, injection (5/3)*3 = 5
        assert st.est[0] == pytest.approx(5.0)
        assert st.weight[0] == pytest.approx(5.0 / 3.0)

    def test_negative_injection_self_corrects(self, k5):
        trim = TrimSpec(alpha=0.2, n=5)
        p = GoTrim(trim, GoRank())
        st = p.init_state(k5, Dataset(values=[3.0, 1.0, 2.0, 4.0, 5.0]))
        st.weight[0] = 5.0 / 3.0
        st.ranker_state.rank[0] = 1.0  # estimate left the inclusion interval
        before = st.est[0]
        t = p.trim
        wp = weight(1.0, t)
        st.est[0] += (wp - st.weight[0]) * st.values[0]
        assert st.est[0] - before == pytest.approx(-5.0)

    def test_edge_average_conserves_sum(self, k5):
        trim = TrimSpec(alpha=0.2, n=5)
        p = GoTrim(trim, GoRank())
        st = p.init_state(k5, range_dataset(5))
        st.est[:] = [0.0, 10.0, 3.0, 4.0, 5.0]
        total = st.est.sum()
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.est[:2], [5.0, 5.0])
        assert st.est.sum() == pytest.approx(total)

    def test_bookkeeping_invariant_random_run(self):
        g = build_graph(TopologySpec("watts_strogatz", 30, k=4, p=0.2, seed=3))
        d = range_dataset(30)
        p = GoTrim(TrimSpec(alpha=0.2, n=30), GoRank(), track_invariant=True)
        traj = run_trial(p, g, d, 3000, TrialRecorder([3000]), seed=4)
        assert traj.max_rel_dev < 1e-9

    def test_oracle_ranks_converge_at_averaging_rate(self, k5):
        # with exact ranks the weights are correct from round one, so the
        # estimate follows the plain-averaging recursion started at w*X
        d = Dataset(values=[3.0, 1.0, 2.0, 4.0, 5.0])
        trim = TrimSpec(alpha=0.2, n=5)
        p = GoTrim(trim, OracleRanker())
        trials = 4000
        finals = np.empty((trials, 5))
        for i in range(trials):
            traj = run_trial(p, k5, d, 30, TrialRecorder([30]), trial_rng(77, i))
            finals[i] = traj.last("est")
        w0 = weight(true_ranks(d), trim) * d.values
        oracle = expected_average_oracle(k5, w0, [29])[0]
        se = finals.std(axis=0, ddof=1) / np.sqrt(trials)
        assert (np.abs(finals.mean(axis=0) - oracle) <= 3 * se + 1e-9).all()

    def test_requires_ranker_with_rank_view(self):
        trim = TrimSpec(alpha=0.2, n=5)
        with pytest.raises(CompositionError):
            GoTrim(trim, GossipAverage())

    def test_async_composition_warns_experimental(self):
        trim = TrimSpec(alpha=0.2, n=5)
        with pytest.warns(UserWarning, match="experimental"):
            GoTrim(trim, AsyncGoRank())

    def test_gotrim_requires_trim_via_cli_name(self):
        with pytest.raises(ParameterError):
            make_protocol("gotrim")


class TestScalarProtocols:
    def test_average_pair(self, single_edge):
        p = GossipAverage()
        st = p.init_state(single_edge, Dataset(values=[0.0, 2.0]))
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.est, [1.0, 1.0])

    def test_average_fixed_point(self, single_edge):
        p = GossipAverage()
        st = p.init_state(single_edge, Dataset(values=[2.0, 2.0]))
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.est, [2.0, 2.0])

    def test_average_matches_matrix_power_oracle(self, k3):
        d = Dataset(values=[0.0, 0.0, 3.0])
        trials = 20000
        finals = np.empty((trials, 3))
        for i in range(trials):
            traj = run_trial(GossipAverage(), k3, d, 10, TrialRecorder([10]), trial_rng(5, i))
            finals[i] = traj.last("est")
        oracle = expected_average_oracle(k3, d.values, [10])[0]
        se = finals.std(axis=0, ddof=1) / np.sqrt(trials)
        assert (np.abs(finals.mean(axis=0) - oracle) <= 3 * se + 1e-9).all()

    def test_sum_conservation_many_events(self, k5):
        p = GossipAverage()
        st = p.init_state(k5, range_dataset(5))
        rng = np.random.default_rng(12)
        for s in range(2000):
            i, j = k5.edges[rng.integers(0, 10)]
            p.edge_phase(st, int(i), int(j), s)
        assert st.est.sum() == pytest.approx(15.0, rel=1e-12)

    def test_clipped_half_step(self, single_edge):
        p = ClippedGossip(tau=4.0)
        st = p.init_state(single_edge, Dataset(values=[0.0, 10.0]))
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.est, [2.0, 8.0])

    def test_clipped_inactive_equals_averaging(self, single_edge):
        p = ClippedGossip(tau=3.0)
        st = p.init_state(single_edge, Dataset(values=[1.0, 2.0]))
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.est, [1.5, 1.5])

    def test_clipped_huge_tau_reduces_to_averaging(self, single_edge):
        p = ClippedGossip(tau=1e18)
        st = p.init_state(single_edge, Dataset(values=[0.0, 10.0]))
        p.edge_phase(st, 0, 1, 1)
        assert np.array_equal(st.est, [5.0, 5.0])

    def test_clipped_conserves_sum_and_convex_hull(self, k5):
        vals = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
        p = ClippedGossip(tau=2.0)
        st = p.init_state(k5, Dataset(values=vals))
        rng = np.random.default_rng(13)
        for s in range(5000):
            i, j = k5.edges[rng.integers(0, 10)]
            p.edge_phase(st, int(i), int(j), s)
            assert st.est.min() >= vals.min() - 1e-12
            assert st.est.max() <= vals.max() + 1e-12
        assert st.est.sum() == pytest.approx(vals.sum(), rel=1e-9)

    def test_clipped_requires_positive_tau(self):
        with pytest.raises(ParameterError):
            ClippedGossip(tau=0.0)


class TestSizeEstimation:
    def test_initial_source_estimate(self, k5):
        p = SizeEstimation(source=0)
        st = p.init_state(k5, range_dataset(5))
        obs = p.observables(st, 0)
        assert obs["est"][0] == 1.0
        assert obs["size"][0] == pytest.approx(1.0)
        assert np.isnan(obs["size"][1])  # zero entries report not-converged

    def test_convergence_limit(self, k5):
        p = SizeEstimation(source=2)
        traj = run_trial(p, k5, range_dataset(5), 5000, TrialRecorder([5000]), seed=3)
        assert np.allclose(traj.last("size"), 5.0, rtol=1e-3)

    def test_matches_matrix_power_oracle(self, k5):
        trials = 20000
        finals = np.empty((trials, 5))
        for i in range(trials):
            traj = run_trial(SizeEstimation(source=1), k5, range_dataset(5), 8,
                             TrialRecorder([8]), trial_rng(6, i))
            finals[i] = traj.last("est")
        x0 = np.zeros(5)
        x0[1] = 1.0
        oracle = expected_average_oracle(k5, x0, [8])[0]
        se = finals.std(axis=0, ddof=1) / np.sqrt(trials)
        assert (np.abs(finals.mean(axis=0) - oracle) <= 3 * se + 1e-9).all()

    def test_burn_in_suppresses_estimates(self, k5):
        p = SizeEstimation(source=0, burn_in=100)
        st = p.init_state(k5, range_dataset(5))
        assert np.isnan(p.observables(st, 10)["size"]).all()


def test_make_protocol_names():
    from trimgossip.protocols import PROTOCOLS
    trim = TrimSpec(alpha=0.2, n=10)
    for name in PROTOCOLS:
        proto = make_protocol(name, trim=trim)
        assert proto.name == name
    with pytest.raises(ParameterError):
        make_protocol("unknown")
