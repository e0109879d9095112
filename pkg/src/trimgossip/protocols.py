"""The gossip node-state machines.

Every protocol follows the same behavioral contract, driven by the engine:
each round, `local_phase` runs over all nodes (vectorized; a no-op for the
purely event-driven protocols), then one sampled edge fires `edge_phase` on
its two endpoints. `advance` processes a block of pre-sampled rounds through
the active kernel backend; the per-round methods define the reference
semantics and remain the fallback for compositions without a fused kernel.

Rank estimators additionally expose `rank_view(state)`, which is what makes
them pluggable into the trimmed-mean protocol.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import backend
from .data import Dataset, TrimSpec
from .errors import CompositionError, ParameterError
from .graphs import Graph

__all__ = [
    "GoRank",
    "AsyncGoRank",
    "TokenBaseline",
    "BaselinePP",
    "GoTrim",
    "GossipAverage",
    "ClippedGossip",
    "SizeEstimation",
    "OracleRanker",
    "PROTOCOLS",
    "make_protocol",
]


class Protocol:
    """Behavioral contract shared by all protocols."""

    name = "protocol"

    def init_state(self, graph: Graph, dataset: Dataset):
        raise NotImplementedError

    def local_phase(self, state, s: int) -> None:
        """Per-round update applied to every node; `s` is the 1-based round index."""

    def edge_phase(self, state, i: int, j: int, s: int) -> None:
        """Pairwise interaction for the sampled edge (i, j)."""

    def observables(self, state, t: int) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def advance(self, state, s0: int, ei: np.ndarray, ej: np.ndarray) -> None:
        """Run rounds s0 .. s0+len(ei)-1; ei[b] < 0 means no edge fired."""
        self._advance_generic(state, s0, ei, ej)

    def _advance_generic(self, state, s0: int, ei: np.ndarray, ej: np.ndarray) -> None:
        for b in range(ei.shape[0]):
            s = s0 + b
            self.local_phase(state, s)
            i = int(ei[b])
            if i >= 0:
                self.edge_phase(state, i, int(ej[b]), s)

    @staticmethod
    def _check_sizes(graph: Graph, dataset: Dataset) -> None:
        if dataset.n != graph.n:
            raise ParameterError(
                f"dataset size {dataset.n} does not match graph size {graph.n}")


# ---------------------------------------------------------------------------
# rank estimation
# ---------------------------------------------------------------------------

@dataclass
class RankState:
    values: np.ndarray   # fixed local observations
    aux: np.ndarray      # traveling auxiliary observations (a permutation of values)
    comp: np.ndarray     # running average of pairwise comparison outcomes, in [0, 1]
    rank: np.ndarray     # n * comp + 1, in [1, n+1]
    counts: np.ndarray | None = None  # async-only local update counters


class GoRank(Protocol):
    """Synchronous rank estimation through randomly swapped pairwise comparisons."""

    name = "gorank"

    def init_state(self, graph: Graph, dataset: Dataset) -> RankState:
        self._check_sizes(graph, dataset)
        n = dataset.n
        return RankState(
            values=dataset.values.copy(),
            aux=dataset.values.copy(),
            comp=np.zeros(n),
            rank=np.ones(n),
        )

    def local_phase(self, state: RankState, s: int) -> None:
        n = state.values.shape[0]
        inv = 1.0 / s
        ind = (state.values > state.aux).astype(np.float64)
        state.comp[:] = (1.0 - inv) * state.comp + inv * ind
        state.rank[:] = n * state.comp + 1.0

    def edge_phase(self, state: RankState, i: int, j: int, s: int) -> None:
        state.aux[i], state.aux[j] = state.aux[j], state.aux[i]

    def observables(self, state: RankState, t: int) -> dict[str, np.ndarray]:
        return {"rank": state.rank.copy()}

    def rank_view(self, state: RankState) -> np.ndarray:
        return state.rank

    def advance(self, state: RankState, s0, ei, ej) -> None:
        backend.kernels().gorank_sync(state.values, state.aux, state.comp, state.rank,
                                      s0, ei, ej)


class AsyncGoRank(Protocol):
    """Asynchronous variant: sampled endpoints update using local counters."""

    name = "gorank-async"

    def init_state(self, graph: Graph, dataset: Dataset) -> RankState:
        self._check_sizes(graph, dataset)
        n = dataset.n
        return RankState(
            values=dataset.values.copy(),
            aux=dataset.values.copy(),
            comp=np.zeros(n),
            rank=np.ones(n),
            counts=np.zeros(n, dtype=np.int64),
        )

    def edge_phase(self, state: RankState, i: int, j: int, s: int) -> None:
        n = float(state.values.shape[0])
        for p in (i, j):  # update with the pre-swap auxiliary value
            state.counts[p] += 1
            inv = 1.0 / state.counts[p]
            ind = 1.0 if state.values[p] > state.aux[p] else 0.0
            state.comp[p] = (1.0 - inv) * state.comp[p] + inv * ind
            state.rank[p] = n * state.comp[p] + 1.0
        state.aux[i], state.aux[j] = state.aux[j], state.aux[i]

    def observables(self, state: RankState, t: int) -> dict[str, np.ndarray]:
        return {"rank": state.rank.copy()}

    def rank_view(self, state: RankState) -> np.ndarray:
        return state.rank

    def advance(self, state: RankState, s0, ei, ej) -> None:
        backend.kernels().gorank_async(state.values, state.aux, state.comp, state.rank,
                                       state.counts, ei, ej)


@dataclass
class TokenRankState:
    values: np.ndarray
    rank: np.ndarray      # int64 local rank estimates, a permutation of 1..n
    tok_rank: np.ndarray  # traveling rank
    tok_val: np.ndarray   # traveling observation
    tok_id: np.ndarray    # traveling 0-based origin id


class TokenBaseline(Protocol):
    """Token-passing ranking baseline: sort-swap local ranks, let id/rank/value
    triples wander, and adopt a traveling rank when it returns home."""

    name = "baseline"

    def init_state(self, graph: Graph, dataset: Dataset) -> TokenRankState:
        self._check_sizes(graph, dataset)
        n = dataset.n
        return TokenRankState(
            values=dataset.values.copy(),
            rank=np.arange(1, n + 1, dtype=np.int64),
            tok_rank=np.arange(1, n + 1, dtype=np.int64),
            tok_val=dataset.values.copy(),
            tok_id=np.arange(n, dtype=np.int64),
        )

    def edge_phase(self, state: TokenRankState, i: int, j: int, s: int) -> None:
        x, r = state.values, state.rank
        if (x[i] - x[j]) * float(r[i] - r[j]) < 0.0:
            r[i], r[j] = r[j], r[i]
        tv, tr, ti = state.tok_val, state.tok_rank, state.tok_id
        if (tv[i] - tv[j]) * float(tr[i] - tr[j]) < 0.0:
            tr[i], tr[j] = tr[j], tr[i]
        ti[i], ti[j] = ti[j], ti[i]
        tr[i], tr[j] = tr[j], tr[i]
        tv[i], tv[j] = tv[j], tv[i]
        for p in (i, j):
            if ti[p] == p:
                r[p] = tr[p]

    def observables(self, state: TokenRankState, t: int) -> dict[str, np.ndarray]:
        return {"rank": state.rank.astype(np.float64)}

    def rank_view(self, state: TokenRankState) -> np.ndarray:
        return state.rank

    def advance(self, state: TokenRankState, s0, ei, ej) -> None:
        backend.kernels().baseline_token(state.values, state.rank, state.tok_rank,
                                          state.tok_val, state.tok_id, ei, ej,
                                          _NO_TARGET, False)

    def run_until_exact(self, state: TokenRankState, ei, ej, target: np.ndarray) -> int:
        """Advance until rank == target; returns the 1-based hit round, 0 if never."""
        return int(backend.kernels().baseline_token(
            state.values, state.rank, state.tok_rank, state.tok_val, state.tok_id,
            ei, ej, np.asarray(target, dtype=np.int64), True))


@dataclass
class AuxRankState:
    values: np.ndarray
    rank: np.ndarray      # int64 local rank estimates
    aux_rank: np.ndarray  # traveling rank
    aux_val: np.ndarray   # traveling observation


class BaselinePP(Protocol):
    """Ranking baseline that swaps auxiliary (rank, value) pairs every event and
    adopts the auxiliary rank whenever it is discordant with the local pair."""

    name = "baselinepp"

    def init_state(self, graph: Graph, dataset: Dataset) -> AuxRankState:
        self._check_sizes(graph, dataset)
        n = dataset.n
        return AuxRankState(
            values=dataset.values.copy(),
            rank=np.arange(1, n + 1, dtype=np.int64),
            aux_rank=np.arange(1, n + 1, dtype=np.int64),
            aux_val=dataset.values.copy(),
        )

    def edge_phase(self, state: AuxRankState, i: int, j: int, s: int) -> None:
        x, r, ar, av = state.values, state.rank, state.aux_rank, state.aux_val
        if (av[i] - av[j]) * float(ar[i] - ar[j]) < 0.0:
            ar[i], ar[j] = ar[j], ar[i]
        for p in (i, j):
            if (av[p] - x[p]) * float(ar[p] - r[p]) < 0.0 or av[p] == x[p]:
                r[p] = ar[p]
        ar[i], ar[j] = ar[j], ar[i]
        av[i], av[j] = av[j], av[i]

    def observables(self, state: AuxRankState, t: int) -> dict[str, np.ndarray]:
        return {"rank": state.rank.astype(np.float64)}

    def rank_view(self, state: AuxRankState) -> np.ndarray:
        return state.rank

    def advance(self, state: AuxRankState, s0, ei, ej) -> None:
        backend.kernels().baselinepp(state.values, state.rank, state.aux_rank,
                                     state.aux_val, ei, ej, _NO_TARGET, False)

    def run_until_exact(self, state: AuxRankState, ei, ej, target: np.ndarray) -> int:
        return int(backend.kernels().baselinepp(
            state.values, state.rank, state.aux_rank, state.aux_val,
            ei, ej, np.asarray(target, dtype=np.int64), True))


_NO_TARGET = np.empty(0, dtype=np.int64)


class OracleRanker(Protocol):
    """Degenerate ranker holding the exact true ranks; for validating compositions."""

    name = "oracle-ranker"

    def init_state(self, graph: Graph, dataset: Dataset) -> RankState:
        self._check_sizes(graph, dataset)
        from .data import true_ranks
        r = true_ranks(dataset)
        return RankState(values=dataset.values.copy(), aux=dataset.values.copy(),
                         comp=(r - 1) / dataset.n, rank=r.astype(np.float64))

    def observables(self, state: RankState, t: int) -> dict[str, np.ndarray]:
        return {"rank": state.rank.copy()}

    def rank_view(self, state: RankState) -> np.ndarray:
        return state.rank


# ---------------------------------------------------------------------------
# trimmed-mean estimation
# ---------------------------------------------------------------------------

@dataclass
class TrimState:
    values: np.ndarray
    est: np.ndarray        # running trimmed-mean estimates
    weight: np.ndarray     # last applied weight per node
    ranker_state: Any
    max_rel_dev: float = 0.0  # worst observed violation of sum(est) == sum(weight*values)


class GoTrim(Protocol):
    """Trimmed-mean estimation on top of a pluggable ranker.

    Each round every node refreshes its weight from its current rank estimate
    and injects the difference (times its observation) into a running average;
    edge events average the running estimates pairwise and delegate to the
    ranker's own edge interaction.
    """

    name = "gotrim"

    def __init__(self, trim: TrimSpec, ranker: Protocol | None = None,
                 track_invariant: bool = False):
        self.trim = trim
        self.ranker = ranker if ranker is not None else GoRank()
        if not hasattr(self.ranker, "rank_view"):
            raise CompositionError(
                f"{type(self.ranker).__name__} exposes no per-node rank estimates")
        if isinstance(self.ranker, AsyncGoRank):
            warnings.warn("gotrim with an asynchronous ranker is experimental; "
                          "convergence guarantees cover the synchronous pairing",
                          stacklevel=2)
        self.track_invariant = track_invariant

    def init_state(self, graph: Graph, dataset: Dataset) -> TrimState:
        self._check_sizes(graph, dataset)
        if self.trim.n != dataset.n:
            raise ParameterError("trim spec built for a different n")
        return TrimState(
            values=dataset.values.copy(),
            est=np.zeros(dataset.n),
            weight=np.zeros(dataset.n),
            ranker_state=self.ranker.init_state(graph, dataset),
        )

    def local_phase(self, state: TrimState, s: int) -> None:
        self.ranker.local_phase(state.ranker_state, s)
        r = self.ranker.rank_view(state.ranker_state)
        t = self.trim
        wp = np.where((r >= t.a) & (r <= t.b), t.normalizer, 0.0)
        state.est[:] = state.est + (wp - state.weight) * state.values
        state.weight[:] = wp

    def edge_phase(self, state: TrimState, i: int, j: int, s: int) -> None:
        mid = (state.est[i] + state.est[j]) * 0.5
        state.est[i] = mid
        state.est[j] = mid
        self.ranker.edge_phase(state.ranker_state, i, j, s)

    def observables(self, state: TrimState, t: int) -> dict[str, np.ndarray]:
        r = self.ranker.rank_view(state.ranker_state)
        return {"est": state.est.copy(), "weight": state.weight.copy(),
                "rank": np.asarray(r, dtype=np.float64).copy()}

    def advance(self, state: TrimState, s0, ei, ej) -> None:
        t, rs = self.trim, state.ranker_state
        kern = backend.kernels()
        if isinstance(self.ranker, GoRank):
            dev = kern.gotrim_gorank_sync(state.values, rs.aux, rs.comp, rs.rank,
                                          state.est, state.weight, s0, ei, ej,
                                          t.a, t.b, t.normalizer, self.track_invariant)
        elif isinstance(self.ranker, BaselinePP):
            dev = kern.gotrim_baselinepp(state.values, rs.rank, rs.aux_rank, rs.aux_val,
                                         state.est, state.weight, ei, ej,
                                         t.a, t.b, t.normalizer, self.track_invariant)
        else:
            dev = self._advance_tracked(state, s0, ei, ej)
        state.max_rel_dev = max(state.max_rel_dev, float(dev))

    def _advance_tracked(self, state: TrimState, s0, ei, ej) -> float:
        max_dev = 0.0
        for b in range(ei.shape[0]):
            s = s0 + b
            self.local_phase(state, s)
            i = int(ei[b])
            if i >= 0:
                self.edge_phase(state, i, int(ej[b]), s)
            if self.track_invariant:
                swx = float(np.dot(state.weight, state.values))
                dev = abs(float(state.est.sum()) - swx) / max(1.0, abs(swx))
                max_dev = max(max_dev, dev)
        return max_dev


# ---------------------------------------------------------------------------
# scalar gossip: averaging, clipped averaging, network-size estimation
# ---------------------------------------------------------------------------

@dataclass
class ScalarState:
    est: np.ndarray


class GossipAverage(Protocol):
    """Plain randomized pairwise averaging."""

    name = "average"

    def init_state(self, graph: Graph, dataset: Dataset) -> ScalarState:
        self._check_sizes(graph, dataset)
        return ScalarState(est=dataset.values.copy())

    def edge_phase(self, state: ScalarState, i: int, j: int, s: int) -> None:
        mid = (state.est[i] + state.est[j]) * 0.5
        state.est[i] = mid
        state.est[j] = mid

    def observables(self, state: ScalarState, t: int) -> dict[str, np.ndarray]:
        return {"est": state.est.copy()}

    def advance(self, state: ScalarState, s0, ei, ej) -> None:
        backend.kernels().gossip_average(state.est, ei, ej)


class ClippedGossip(Protocol):
    """Pairwise averaging with every half-step clipped to a fixed radius.

    Conserves the sum, so it converges to the plain (corruption-included)
    mean; it cannot express a trimmed statistic.
    """

    name = "clipped"

    def __init__(self, tau: float = 1.0):
        if tau <= 0:
            raise ParameterError("clipping radius tau must be positive")
        self.tau = tau

    def init_state(self, graph: Graph, dataset: Dataset) -> ScalarState:
        self._check_sizes(graph, dataset)
        return ScalarState(est=dataset.values.copy())

    def edge_phase(self, state: ScalarState, i: int, j: int, s: int) -> None:
        est, tau = state.est, self.tau
        xi, xj = float(est[i]), float(est[j])
        z = xj - xi
        az = abs(z)
        d = z if az <= tau else tau * (z / az)
        est[i] = xi + 0.5 * d
        z = xi - xj
        az = abs(z)
        d = z if az <= tau else tau * (z / az)
        est[j] = xj + 0.5 * d

    def observables(self, state: ScalarState, t: int) -> dict[str, np.ndarray]:
        return {"est": state.est.copy()}

    def advance(self, state: ScalarState, s0, ei, ej) -> None:
        backend.kernels().clipped_gossip(state.est, self.tau, ei, ej)


class SizeEstimation(Protocol):
    """Network-size estimation: average an indicator vector, report reciprocals."""

    name = "size"

    CONVERGENCE_FLOOR = 1e-12

    def __init__(self, source: int = 0, burn_in: int = 0):
        self.source = source
        self.burn_in = burn_in

    def init_state(self, graph: Graph, dataset: Dataset) -> ScalarState:
        if not 0 <= self.source < graph.n:
            raise ParameterError("source node out of range")
        est = np.zeros(graph.n)
        est[self.source] = 1.0
        return ScalarState(est=est)

    def edge_phase(self, state: ScalarState, i: int, j: int, s: int) -> None:
        mid = (state.est[i] + state.est[j]) * 0.5
        state.est[i] = mid
        state.est[j] = mid

    def observables(self, state: ScalarState, t: int) -> dict[str, np.ndarray]:
        est = state.est
        size = np.full(est.shape, np.nan)
        if t >= self.burn_in:
            ok = est > self.CONVERGENCE_FLOOR
            size[ok] = 1.0 / est[ok]
        return {"est": est.copy(), "size": size}

    def advance(self, state: ScalarState, s0, ei, ej) -> None:
        backend.kernels().gossip_average(state.est, ei, ej)


# ---------------------------------------------------------------------------
# name-based construction (CLI surface)
# ---------------------------------------------------------------------------

PROTOCOLS = ("gorank", "gorank-async", "baseline", "baselinepp", "gotrim",
             "average", "clipped", "size")


def make_protocol(name: str, *, trim: TrimSpec | None = None, ranker: str = "gorank",
                  tau: float = 1.0, source: int = 0, burn_in: int = 0,
                  track_invariant: bool = False) -> Protocol:
    """Build a protocol by its CLI name."""
    rankers = {"gorank": GoRank, "gorank-async": AsyncGoRank,
               "baseline": TokenBaseline, "baselinepp": BaselinePP,
               "oracle": OracleRanker}
    if name == "gorank":
        return GoRank()
    if name == "gorank-async":
        return AsyncGoRank()
    if name == "baseline":
        return TokenBaseline()
    if name == "baselinepp":
        return BaselinePP()
    if name == "gotrim":
        if trim is None:
            raise ParameterError("gotrim requires a trim specification")
        if ranker not in rankers:
            raise ParameterError(f"unknown ranker {ranker!r}")
        return GoTrim(trim, rankers[ranker](), track_invariant=track_invariant)
    if name == "average":
        return GossipAverage()
    if name == "clipped":
        return ClippedGossip(tau=tau)
    if name == "size":
        return SizeEstimation(source=source, burn_in=burn_in)
    raise ParameterError(f"unknown protocol {name!r}; choose from {PROTOCOLS}")
