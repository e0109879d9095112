"""Trial execution: seeded edge sampling, recording, and multi-trial ensembles.

A trial is strictly sequential: rounds run in order, each consisting of the
protocol's all-node local phase followed by one sampled edge event (or none,
in edge-failure mode). All randomness is drawn up front from a per-trial
generator, so a (config, seed) pair maps to one bit-exact trajectory
regardless of backend or recording granularity. Ensembles derive per-trial
seeds by a counter-based split of the base seed and aggregate in trial
order, which makes parallel and sequential runs identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ParameterError
from .graphs import Graph

__all__ = [
    "EdgeSampler",
    "TrialRecorder",
    "Trajectory",
    "EnsembleResult",
    "log_sample_times",
    "run_trial",
    "run_ensemble",
    "trial_rng",
]

_WEIGHT_TOL = 1e-12


def trial_rng(base_seed: int, trial: int) -> np.random.Generator:
    """Independent per-trial stream from a counter-based seed split."""
    return np.random.default_rng(np.random.SeedSequence((base_seed, trial)))


class EdgeSampler:
    """Seeded sampling over a graph's canonical edge list.

    Modes: uniform (no weights), weighted (probabilities summing to 1), or
    weighted with failure (sum < 1; the residual mass yields a no-event
    round, reported as index -1).
    """

    def __init__(self, graph: Graph, rng: np.random.Generator):
        if graph.num_edges == 0:
            raise ParameterError("cannot sample edges from an empty graph")
        self.graph = graph
        self.rng = rng
        if graph.weights is None:
            self.mode = "uniform"
            self._probs = None
        else:
            total = float(graph.weights.sum())
            if total < 1.0 - _WEIGHT_TOL:
                self.mode = "failure"
                self._probs = np.concatenate([graph.weights, [1.0 - total]])
            else:
                self.mode = "weighted"
                self._probs = graph.weights / total
            self._probs = self._probs / self._probs.sum()  # exact renorm for rng.choice

    def draw(self, count: int) -> np.ndarray:
        """Sample `count` edge indices; -1 marks a no-event round."""
        m = self.graph.num_edges
        if self.mode == "uniform":
            return self.rng.integers(0, m, size=count, dtype=np.int64)
        idx = self.rng.choice(self._probs.shape[0], size=count, p=self._probs)
        idx = idx.astype(np.int64)
        if self.mode == "failure":
            idx[idx == m] = -1
        return idx

    def endpoints(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Presampled endpoint arrays for `count` rounds (-1 on no-event)."""
        idx = self.draw(count)
        edges = self.graph.edges
        live = idx >= 0
        ei = np.where(live, edges[np.where(live, idx, 0), 0], -1).astype(np.int64)
        ej = np.where(live, edges[np.where(live, idx, 0), 1], -1).astype(np.int64)
        return np.ascontiguousarray(ei), np.ascontiguousarray(ej)


def log_sample_times(T: int, num: int = 200, always=(1, 2, 5, 10)) -> np.ndarray:
    """Log-spaced recording times in [1, T], plus a few fixed early rounds."""
    if T < 1:
        raise ParameterError("iteration count must be >= 1")
    pts = np.unique(np.round(np.logspace(0.0, math.log10(T), num)).astype(np.int64))
    extra = np.array([t for t in always if 1 <= t <= T], dtype=np.int64)
    return np.unique(np.concatenate([pts, extra]))


@dataclass
class Trajectory:
    """Metrics of one trial, captured at strictly increasing round indices."""

    times: np.ndarray
    series: dict[str, np.ndarray]
    max_rel_dev: float = 0.0  # bookkeeping diagnostic (trim protocol only)

    def last(self, name: str) -> np.ndarray:
        return self.series[name][-1]


class TrialRecorder:
    """Captures named metrics at the requested sample times.

    `metrics` maps a metric name to ``fn(observables, t) -> scalar or array``;
    when empty, all protocol observables are recorded raw. Recording never
    mutates protocol state (it sees copies).
    """

    def __init__(self, sample_times, metrics: dict | None = None):
        times = np.unique(np.asarray(sample_times, dtype=np.int64))
        if times.size == 0 or times[0] < 1:
            raise ParameterError("sample times must be >= 1")
        self.sample_times = times
        self.metrics = dict(metrics) if metrics else None
        self._rows: dict[str, list] = {}

    def record(self, protocol, state, t: int) -> None:
        obs = protocol.observables(state, t)
        if self.metrics is None:
            for key, val in obs.items():
                self._rows.setdefault(key, []).append(np.asarray(val, dtype=np.float64))
        else:
            for key, fn in self.metrics.items():
                self._rows.setdefault(key, []).append(
                    np.asarray(fn(obs, t), dtype=np.float64))

    def to_trajectory(self, max_rel_dev: float = 0.0) -> Trajectory:
        series = {k: np.stack(v) for k, v in self._rows.items()}
        return Trajectory(times=self.sample_times.copy(), series=series,
                          max_rel_dev=max_rel_dev)


def run_trial(protocol, graph: Graph, dataset: Dataset, T: int,
              recorder: TrialRecorder | None = None, seed=0) -> Trajectory:
    """Execute one trial of `T` rounds; deterministic given the seed."""
    if T < 1:
        raise ParameterError("iteration count must be >= 1")
    state = protocol.init_state(graph, dataset)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ei, ej = EdgeSampler(graph, rng).endpoints(T)
    if recorder is None:
        recorder = TrialRecorder([T])
    times = recorder.sample_times
    if times[-1] > T:
        raise ParameterError(f"sample time {times[-1]} beyond horizon T={T}")
    done = 0
    for t in times:
        t = int(t)
        if t > done:
            protocol.advance(state, done + 1, ei[done:t], ej[done:t])
            done = t
        recorder.record(protocol, state, t)
    if done < T:
        protocol.advance(state, done + 1, ei[done:T], ej[done:T])
    return recorder.to_trajectory(max_rel_dev=getattr(state, "max_rel_dev", 0.0))


@dataclass
class EnsembleResult:
    """Stacked per-trial series plus order-stable aggregates."""

    times: np.ndarray
    stacked: dict[str, np.ndarray]  # name -> (trials, num_times, ...) array
    trials: int
    max_rel_dev: float = 0.0

    def mean(self, name: str) -> np.ndarray:
        return self.stacked[name].mean(axis=0)

    def std(self, name: str) -> np.ndarray:
        return self.stacked[name].std(axis=0, ddof=1) if self.trials > 1 \
            else np.zeros_like(self.stacked[name][0])

    def sem(self, name: str) -> np.ndarray:
        return self.std(name) / math.sqrt(self.trials)


@dataclass
class _TrialJob:
    protocol_factory: object
    graph: Graph
    dataset: Dataset
    T: int
    sample_times: np.ndarray
    metrics: dict | None
    base_seed: int

    def __call__(self, trial: int) -> Trajectory:
        recorder = TrialRecorder(self.sample_times, self.metrics)
        return run_trial(self.protocol_factory(), self.graph, self.dataset, self.T,
                         recorder, trial_rng(self.base_seed, trial))


def run_ensemble(protocol_factory, graph: Graph, dataset: Dataset, T: int,
                 trials: int, base_seed: int = 0, sample_times=None,
                 metrics: dict | None = None, n_jobs: int = 1) -> EnsembleResult:
    """Run `trials` independent seeded trials and aggregate in trial order.

    `protocol_factory` is a zero-argument callable building a fresh protocol
    (must be picklable for n_jobs > 1). Aggregation is a deterministic
    reduction over the trial index, so parallel and sequential execution
    agree element-wise.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if sample_times is None:
        sample_times = log_sample_times(T)
    job = _TrialJob(protocol_factory, graph, dataset, T,
                    np.asarray(sample_times, dtype=np.int64), metrics, base_seed)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            trajectories = list(pool.map(job, range(trials), chunksize=max(1, trials // (4 * n_jobs))))
    else:
        trajectories = [job(i) for i in range(trials)]
    stacked = {name: np.stack([tr.series[name] for tr in trajectories])
               for name in trajectories[0].series}
    worst = max(tr.max_rel_dev for tr in trajectories)
    return EnsembleResult(times=trajectories[0].times, stacked=stacked,
                          trials=trials, max_rel_dev=worst)
