"""Communication graphs: generators, Laplacian spectra and connectivity constants.

Every protocol in this package runs on a `Graph`: a simple undirected graph
with an optional per-edge sampling distribution. The convergence rate of all
gossip protocols implemented here is governed by the connectivity constant
``c = lambda2 / |E|``, where ``lambda2`` is the algebraic connectivity
(second-smallest Laplacian eigenvalue). `spectral_info` computes these
constants; `validate` checks the connectivity/non-bipartiteness assumptions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import GenerationError, NumericalError, ParameterError, ParseError

__all__ = [
    "TopologySpec",
    "Graph",
    "SpectralInfo",
    "GraphReport",
    "build_graph",
    "laplacian",
    "adjacency",
    "spectral_info",
    "validate",
    "grid_dims",
    "read_edge_list",
    "with_edge_failure",
]

# Dense symmetric eigensolve below this size, deflated iterative solve above.
DENSE_EIG_LIMIT = 2000


@dataclass(frozen=True)
class TopologySpec:
    """Declarative description of a communication graph.

    kind is one of: complete, grid2d, watts_strogatz, cycle, kregular,
    clustered, edgelist. Unused parameters are ignored for the given kind.
    """

    kind: str
    n: int = 0
    rows: int | None = None
    cols: int | None = None
    k: int = 4            # watts_strogatz mean degree (even)
    p: float = 0.2        # watts_strogatz rewiring probability
    degree: int = 3       # kregular degree
    cluster_sizes: tuple[int, ...] = ()
    inter_cluster_edges: int = 0
    path: str | None = None
    seed: int | None = None


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with optional edge-sampling probabilities.

    Edges are stored once each as canonical (u, v) rows with u < v, sorted
    lexicographically; `weights`, when present, are sampling probabilities
    p_e > 0 with sum(p_e) <= 1 (a strict inequality models edge failure:
    the residual mass is the per-round probability that no edge fires).
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        if edges.size:
            if (lo < 0).any() or (hi >= self.n).any():
                raise ParameterError("edge endpoint out of range [0, n)")
            if (lo == hi).any():
                raise ParameterError("self-loops are not allowed")
        canon = np.stack([lo, hi], axis=1)
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        canon = canon[order]
        if canon.shape[0] > 1 and (np.diff(canon, axis=0) == 0).all(axis=1).any():
            raise ParameterError("duplicate edges are not allowed")
        canon.setflags(write=False)
        object.__setattr__(self, "edges", canon)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)[order]
            if w.shape != (canon.shape[0],):
                raise ParameterError("weights length must match edge count")
            if (w <= 0).any():
                raise ParameterError("edge weights must be positive")
            if w.sum() > 1.0 + 1e-12:
                raise ParameterError("edge weights must sum to at most 1")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def neighbor_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(int(v))
            adj[v].append(int(u))
        return adj


@dataclass(frozen=True)
class SpectralInfo:
    """Laplacian spectral constants used throughout the convergence bounds."""

    lambda2: float
    c: float              # lambda2 / |E|
    c2: float             # c / 2
    lambda2_swap: float   # 1 - c, second-largest eigenvalue of the expected swap matrix
    lambda2_avg: float    # 1 - c/2, second-largest eigenvalue of the expected averaging matrix
    connected: bool
    bipartite: bool


@dataclass
class GraphReport:
    connected: bool
    bipartite: bool
    warnings: list[str] = field(default_factory=list)


def grid_dims(n: int) -> tuple[int, int]:
    """Factor n as rows x cols with rows <= cols minimizing cols - rows."""
    for r in range(int(math.isqrt(n)), 0, -1):
        if n % r == 0:
            return r, n // r
    raise ParameterError(f"cannot factor n={n}")  # unreachable for n >= 1


def _complete(n: int) -> np.ndarray:
    return np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64)


def _grid2d(rows: int, cols: int) -> np.ndarray:
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return np.array(edges, dtype=np.int64)


def _cycle(n: int) -> np.ndarray:
    return np.array([(i, (i + 1) % n) for i in range(n)], dtype=np.int64)


def _watts_strogatz(n: int, k: int, p: float, seed) -> np.ndarray:
    g = nx.watts_strogatz_graph(n, k, p, seed=seed)
    return np.array(sorted(tuple(sorted(e)) for e in g.edges()), dtype=np.int64)


def _k_regular(n: int, d: int, seed, max_retries: int = 1000) -> np.ndarray:
    # Pairing (configuration) model with rejection of self-loops and multi-edges.
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(max_retries):
        rng.shuffle(stubs)
        u, v = stubs[0::2], stubs[1::2]
        if (u == v).any():
            continue
        pairs = {(min(a, b), max(a, b)) for a, b in zip(u.tolist(), v.tolist())}
        if len(pairs) == u.shape[0]:
            return np.array(sorted(pairs), dtype=np.int64)
    raise GenerationError(f"no simple {d}-regular graph found in {max_retries} pairing attempts")


def _clustered(sizes: tuple[int, ...], bridges: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    edges = []
    for ci, size in enumerate(sizes):
        base = offsets[ci]
        edges.extend((base + i, base + j) for i in range(size) for j in range(i + 1, size))
    labels = np.repeat(np.arange(len(sizes)), sizes)
    cross = [(i, j) for i in range(offsets[-1]) for j in range(i + 1, offsets[-1])
             if labels[i] != labels[j]]
    if bridges > len(cross):
        raise ParameterError("more inter-cluster edges requested than cross pairs available")
    picks = rng.choice(len(cross), size=bridges, replace=False)
    edges.extend(cross[i] for i in picks)
    return np.array(edges, dtype=np.int64)


def read_edge_list(path) -> tuple[np.ndarray, np.ndarray | None, int]:
    """Parse a `u v [p_e]` edge-list file (0-based ids, # comments).

    Returns (edges, weights_or_None, implied_n).
    """
    edges, weights = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'u v [p_e]', got {raw.strip()!r}", line=lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else None
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            edges.append((u, v))
            weights.append(w)
    if not edges:
        raise ParseError("empty edge list")
    have_w = [w is not None for w in weights]
    if any(have_w) and not all(have_w):
        raise ParseError("weights must be given for all edges or none")
    earr = np.array(edges, dtype=np.int64)
    warr = np.array(weights, dtype=np.float64) if all(have_w) else None
    return earr, warr, int(earr.max()) + 1


def build_graph(spec: TopologySpec) -> Graph:
    """Construct the graph described by `spec`; deterministic given its seed."""
    kind = spec.kind.lower().replace("-", "_")
    n = spec.n
    if kind == "edgelist":
        if not spec.path:
            raise ParameterError("edgelist topology requires a path")
        edges, weights, implied_n = read_edge_list(spec.path)
        return Graph(n=max(n, implied_n), edges=edges, weights=weights)
    if n < 1:
        raise ParameterError("node count must be positive")
    if kind == "complete":
        return Graph(n=n, edges=_complete(n))
    if kind == "grid2d":
        rows, cols = (spec.rows, spec.cols)
        if rows is None or cols is None:
            rows, cols = grid_dims(n)
        if rows * cols != n:
            raise ParameterError(f"grid2d needs rows*cols == n, got {rows}x{cols} != {n}")
        return Graph(n=n, edges=_grid2d(rows, cols))
    if kind == "cycle":
        if n < 3:
            raise ParameterError("cycle needs n >= 3")
        return Graph(n=n, edges=_cycle(n))
    if kind == "watts_strogatz":
        if spec.k % 2 != 0 or spec.k <= 0:
            raise ParameterError("watts_strogatz mean degree k must be a positive even integer")
        if not 0.0 <= spec.p <= 1.0:
            raise ParameterError("rewiring probability must lie in [0, 1]")
        return Graph(n=n, edges=_watts_strogatz(n, spec.k, spec.p, spec.seed))
    if kind == "kregular":
        if spec.degree < 3:
            raise ParameterError("kregular degree must be >= 3")
        if (spec.degree * n) % 2 != 0:
            raise ParameterError("kregular requires d*n even")
        return Graph(n=n, edges=_k_regular(n, spec.degree, spec.seed))
    if kind == "clustered":
        if not spec.cluster_sizes:
            raise ParameterError("clustered topology requires cluster_sizes")
        if n and n != sum(spec.cluster_sizes):
            raise ParameterError("n must equal sum(cluster_sizes)")
        edges = _clustered(tuple(spec.cluster_sizes), spec.inter_cluster_edges, spec.seed)
        return Graph(n=sum(spec.cluster_sizes), edges=edges)
    raise ParameterError(f"unknown topology kind {spec.kind!r}")


def adjacency(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n), dtype=np.float64)
    a[g.edges[:, 0], g.edges[:, 1]] = 1.0
    a[g.edges[:, 1], g.edges[:, 0]] = 1.0
    return a


def laplacian(g: Graph) -> np.ndarray:
    """Dense graph Laplacian: degree matrix minus adjacency matrix."""
    a = adjacency(g)
    return np.diag(a.sum(axis=1)) - a


def _sparse_laplacian(g: Graph) -> scipy.sparse.csr_matrix:
    m = g.num_edges
    rows = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    cols = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    data = -np.ones(2 * m)
    off = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(g.n, g.n))
    deg = np.asarray(-off.sum(axis=1)).ravel()
    return (off + scipy.sparse.diags(deg)).tocsr()


def _bfs_reach(adj: list[list[int]], start: int) -> np.ndarray:
    seen = np.zeros(len(adj), dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def is_connected(g: Graph) -> bool:
    if g.n <= 1:
        return True
    return bool(_bfs_reach(g.neighbor_lists(), 0).all())


def is_bipartite(g: Graph) -> bool:
    adj = g.neighbor_lists()
    color = np.full(g.n, -1, dtype=np.int8)
    for start in range(g.n):
        if color[start] >= 0:
            continue
        color[start] = 0
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    stack.append(v)
                elif color[v] == color[u]:
                    return False
    return True


def _lambda2_dense(g: Graph) -> float:
    vals = scipy.linalg.eigh(laplacian(g), eigvals_only=True, subset_by_index=(0, 1))
    return float(vals[1])


def _lambda2_iterative(g: Graph) -> float:
    # Deflate the all-ones kernel by shifting it above the bulk spectrum,
    # then ask ARPACK for the smallest eigenvalue.
    lap = _sparse_laplacian(g)
    shift = 2.0 * g.degrees().max() + 1.0
    n = g.n

    def matvec(x):
        return lap @ x + shift * x.mean()

    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    try:
        vals = scipy.sparse.linalg.eigsh(op, k=1, which="SA", tol=1e-12, maxiter=50 * n,
                                         return_eigenvectors=False)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise NumericalError(f"lambda2 eigensolve did not converge: {exc}") from exc
    return float(vals[0])


def spectral_info(g: Graph) -> SpectralInfo:
    """Compute lambda2 and the derived connectivity constants of `g`."""
    if g.n < 2 or g.num_edges < 1:
        raise ParameterError("spectral_info needs at least 2 nodes and 1 edge")
    lam2 = _lambda2_dense(g) if g.n <= DENSE_EIG_LIMIT else _lambda2_iterative(g)
    if abs(lam2) < 1e-9:
        lam2 = 0.0
    c = lam2 / g.num_edges
    return SpectralInfo(
        lambda2=lam2,
        c=c,
        c2=c / 2.0,
        lambda2_swap=1.0 - c,
        lambda2_avg=1.0 - c / 2.0,
        connected=is_connected(g),
        bipartite=is_bipartite(g),
    )


def validate(g: Graph) -> GraphReport:
    """Check the assumptions behind the convergence theory; warns, never raises.

    Gossip convergence guarantees assume a connected, non-bipartite graph.
    Bipartite graphs (even cycles, grids) still work in practice for the
    averaging-based protocols, so violations are reported as warnings.
    """
    report = GraphReport(connected=is_connected(g), bipartite=is_bipartite(g))
    if not report.connected:
        report.warnings.append("graph is disconnected; estimates cannot reach consensus")
    if report.bipartite:
        report.warnings.append("graph is bipartite; convergence guarantees need non-bipartite")
    for msg in report.warnings:
        warnings.warn(msg, stacklevel=2)
    return report


def with_edge_failure(g: Graph, survival_prob: float) -> Graph:
    """Scale the sampling distribution so each round fires no edge w.p. 1-survival_prob."""
    if not 0.0 < survival_prob <= 1.0:
        raise ParameterError("survival probability must lie in (0, 1]")
    base = g.weights if g.weights is not None else np.full(g.num_edges, 1.0 / g.num_edges)
    return Graph(n=g.n, edges=g.edges.copy(), weights=base * survival_prob)
