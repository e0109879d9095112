import math

import numpy as np
import pytest

from trimgossip.errors import GenerationError, ParameterError, ParseError
from trimgossip.graphs import (
    Graph,
    TopologySpec,
    build_graph,
    grid_dims,
    is_bipartite,
    is_connected,
    laplacian,
    read_edge_list,
    spectral_info,
    validate,
    with_edge_failure,
)


def lam2_cycle(n):
    return 2.0 * (1.0 - math.cos(2.0 * math.pi / n))


def lam2_grid(rows, cols):
    return min(2.0 * (1.0 - math.cos(math.pi / rows)),
               2.0 * (1.0 - math.cos(math.pi / cols)))


class TestConstruction:
    def test_complete_k5_has_all_pairs(self):
        g = build_graph(TopologySpec("complete", 5))
        assert g.num_edges == 10
        assert {tuple(e) for e in g.edges} == {(i, j) for i in range(5) for j in range(i + 1, 5)}

    def test_grid_20x25_edge_count(self):
        g = build_graph(TopologySpec("grid2d", 500, rows=20, cols=25))
        assert g.num_edges == 20 * 24 + 25 * 19  # 955

    def test_cycle_500(self):
        g = build_graph(TopologySpec("cycle", 500))
        assert g.num_edges == 500
        assert (g.degrees() == 2).all()

    def test_grid_dims_default_factorization(self):
        assert grid_dims(500) == (20, 25)
        assert grid_dims(100) == (10, 10)
        g = build_graph(TopologySpec("grid2d", 500))
        assert g.num_edges == 955

    def test_watts_strogatz_deterministic_and_degree(self):
        g1 = build_graph(TopologySpec("watts_strogatz", 100, k=4, p=0.2, seed=3))
        g2 = build_graph(TopologySpec("watts_strogatz", 100, k=4, p=0.2, seed=3))
        assert np.array_equal(g1.edges, g2.edges)
        assert g1.num_edges == 100 * 4 // 2  # rewiring preserves the edge count

    def test_kregular_degrees(self):
        g = build_graph(TopologySpec("kregular", 50, degree=3, seed=11))
        assert (g.degrees() == 3).all()

    def test_clustered_counts(self):
        spec = TopologySpec("clustered", 30, cluster_sizes=(10, 10, 10),
                            inter_cluster_edges=5, seed=0)
        g = build_graph(spec)
        within = 3 * (10 * 9 // 2)
        assert g.num_edges == within + 5

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            build_graph(TopologySpec("watts_strogatz", 10, k=3))  # odd k
        with pytest.raises(ParameterError):
            build_graph(TopologySpec("grid2d", 10, rows=3, cols=4))
        with pytest.raises(ParameterError):
            build_graph(TopologySpec("kregular", 5, degree=3))  # d*n odd
        with pytest.raises(ParameterError):
            build_graph(TopologySpec("nope", 5))

    def test_kregular_impossible_raises_generation_error(self):
        # d = n-1 forces the complete graph; pairing rarely finds it, so the
        # retry budget must trip instead of looping forever.
        with pytest.raises((GenerationError, ParameterError)):
            build_graph(TopologySpec("kregular", 4, degree=5, seed=0))

    def test_graph_rejects_self_loops_and_duplicates(self):
        with pytest.raises(ParameterError):
            Graph(n=3, edges=[(0, 0)])
        with pytest.raises(ParameterError):
            Graph(n=3, edges=[(0, 1), (1, 0)])
        with pytest.raises(ParameterError):
            Graph(n=3, edges=[(0, 5)])

    def test_weights_validated(self):
        with pytest.raises(ParameterError):
            Graph(n=3, edges=[(0, 1), (1, 2)], weights=[0.5, 0.6])
        with pytest.raises(ParameterError):
            Graph(n=3, edges=[(0, 1), (1, 2)], weights=[0.5, -0.1])
        g = Graph(n=3, edges=[(0, 1), (1, 2)], weights=[0.3, 0.3])
        assert g.weights.sum() == pytest.approx(0.6)

    def test_with_edge_failure_scales_uniform(self):
        g = build_graph(TopologySpec("cycle", 4))
        gf = with_edge_failure(g, 0.5)
        assert np.allclose(gf.weights, 0.5 / 4)


class TestLaplacian:
    def test_single_edge(self):
        g = Graph(n=2, edges=[(0, 1)])
        assert np.array_equal(laplacian(g), [[1.0, -1.0], [-1.0, 1.0]])

    def test_triangle(self):
        g = build_graph(TopologySpec("complete", 3))
        lap = laplacian(g)
        assert np.array_equal(np.diag(lap), [2.0, 2.0, 2.0])
        assert lap[0, 1] == lap[1, 2] == -1.0

    def test_empty_graph_zero_matrix(self):
        g = Graph(n=3, edges=np.empty((0, 2), dtype=np.int64))
        assert np.array_equal(laplacian(g), np.zeros((3, 3)))

    @pytest.mark.parametrize("spec", [
        TopologySpec("complete", 7),
        TopologySpec("grid2d", 12, rows=3, cols=4),
        TopologySpec("watts_strogatz", 20, k=4, p=0.3, seed=5),
        TopologySpec("kregular", 10, degree=3, seed=2),
    ])
    def test_rows_sum_to_zero_and_symmetric(self, spec):
        g = build_graph(spec)
        lap = laplacian(g)
        assert np.array_equal(lap, lap.T)
        assert np.array_equal(lap.sum(axis=1), np.zeros(g.n))
        assert np.array_equal(np.diag(lap), g.degrees().astype(float))


class TestSpectral:
    @pytest.mark.parametrize("n", list(range(3, 51)) + [500])
    def test_complete_lambda2_equals_n(self, n):
        info = spectral_info(build_graph(TopologySpec("complete", n)))
        assert info.lambda2 == pytest.approx(n, rel=1e-9)
        assert info.c == pytest.approx(2.0 / (n - 1), rel=1e-9)

    @pytest.mark.parametrize("n", [5, 10, 500])
    def test_cycle_lambda2(self, n):
        info = spectral_info(build_graph(TopologySpec("cycle", n)))
        assert info.lambda2 == pytest.approx(lam2_cycle(n), rel=1e-9)

    @pytest.mark.parametrize("rows,cols", [(4, 5), (20, 25)])
    def test_grid_lambda2(self, rows, cols):
        info = spectral_info(build_graph(TopologySpec("grid2d", rows * cols, rows=rows, cols=cols)))
        assert info.lambda2 == pytest.approx(lam2_grid(rows, cols), rel=1e-9)

    def test_derived_constants(self):
        info = spectral_info(build_graph(TopologySpec("complete", 5)))
        assert info.c == pytest.approx(0.5)
        assert info.c2 == pytest.approx(0.25)
        assert info.lambda2_swap == pytest.approx(0.5)
        assert info.lambda2_avg == pytest.approx(0.75)

    def test_connected_iff_lambda2_positive(self):
        two_triangles = Graph(n=6, edges=[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
        info = spectral_info(two_triangles)
        assert info.lambda2 <= 1e-9 and not info.connected
        info2 = spectral_info(build_graph(TopologySpec("cycle", 6)))
        assert info2.lambda2 > 1e-9 and info2.connected

    def test_iterative_path_matches_dense(self, monkeypatch):
        import trimgossip.graphs as G
        g = build_graph(TopologySpec("cycle", 64))
        dense = spectral_info(g).lambda2
        monkeypatch.setattr(G, "DENSE_EIG_LIMIT", 10)
        iterative = spectral_info(g).lambda2
        assert iterative == pytest.approx(dense, rel=1e-9)

    def test_watts_strogatz_connectivity_band(self):
        # seed-averaged c for WS(n=500, k=4, p=0.2) lands in the decade
        # around 3.3e-4; the exact value is generator-seed dependent
        cs = [spectral_info(build_graph(
            TopologySpec("watts_strogatz", 500, k=4, p=0.2, seed=s))).c
            for s in range(20)]
        mean_c = float(np.mean(cs))
        assert 1e-4 <= mean_c <= 1e-3


class TestValidate:
    def test_k3(self, k3):
        report = validate(k3)
        assert report.connected and not report.bipartite and not report.warnings

    def test_even_cycle_bipartite_warns(self):
        g = build_graph(TopologySpec("cycle", 500))
        with pytest.warns(UserWarning, match="bipartite"):
            report = validate(g)
        assert report.connected and report.bipartite

    def test_disconnected_warns(self):
        g = Graph(n=6, edges=[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
        with pytest.warns(UserWarning, match="disconnected"):
            report = validate(g)
        assert not report.connected

    def test_bfs_helpers(self):
        assert is_bipartite(build_graph(TopologySpec("cycle", 4)))
        assert not is_bipartite(build_graph(TopologySpec("cycle", 5)))
        assert is_connected(build_graph(TopologySpec("grid2d", 6, rows=2, cols=3)))


class TestEdgeList:
    def test_roundtrip(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("# comment\n0 1\n1 2  # trailing\n\n2 3\n")
        edges, weights, n = read_edge_list(p)
        assert n == 4 and weights is None
        assert [tuple(e) for e in edges] == [(0, 1), (1, 2), (2, 3)]
        g = build_graph(TopologySpec("edgelist", path=str(p)))
        assert g.n == 4 and g.num_edges == 3

    def test_weighted(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1 0.25\n1 2 0.25\n")
        g = build_graph(TopologySpec("edgelist", path=str(p)))
        assert np.allclose(g.weights, [0.25, 0.25])

    def test_malformed_line_reports_number(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1\noops\n")
        with pytest.raises(ParseError, match="line 2"):
            read_edge_list(p)
