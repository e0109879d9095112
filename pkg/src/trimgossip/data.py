"""Observations, contamination, and the exact centralized oracles.

Protocols estimate two global statistics of the per-node observations:
ranks and the alpha-trimmed mean. This module holds the data containers
and the exact (centralized) reference computations every protocol is
tested against: mid-ranks, the sort-and-average trimmed mean, and its
equivalent weighted-average form through the rank-indicator weight
function.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .errors import ParameterError, ParseError, TiesError
from .graphs import Graph

__all__ = [
    "Dataset",
    "ContaminationSpec",
    "TrimSpec",
    "true_ranks",
    "trimmed_mean",
    "weight",
    "contaminate",
    "load_csv",
    "range_dataset",
]


@dataclass(frozen=True)
class Dataset:
    """Per-node real observations plus contamination provenance flags."""

    values: np.ndarray
    corrupted: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ParameterError("values must be a non-empty 1-D array")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        corrupted = self.corrupted
        if corrupted is None:
            corrupted = np.zeros(values.shape, dtype=bool)
        else:
            corrupted = np.asarray(corrupted, dtype=bool)
            if corrupted.shape != values.shape:
                raise ParameterError("corrupted flags must match values length")
        corrupted.setflags(write=False)
        object.__setattr__(self, "corrupted", corrupted)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def has_ties(self) -> bool:
        return np.unique(self.values).size < self.n


def range_dataset(n: int) -> Dataset:
    """Default synthetic dataset {1, ..., n}."""
    return Dataset(values=np.arange(1, n + 1, dtype=np.float64))


@dataclass(frozen=True)
class ContaminationSpec:
    """Replace a fraction epsilon of values by scaled or shifted outliers."""

    epsilon: float
    mode: str            # "scale" (x -> s*x) or "shift" (x -> x + s)
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise ParameterError("epsilon must lie in (0, 1/2)")
        if self.mode not in ("scale", "shift"):
            raise ParameterError("mode must be 'scale' or 'shift'")


@dataclass(frozen=True)
class TrimSpec:
    """Trimming level alpha with its derived cut count and inclusion interval.

    m values are discarded at each end; a rank-r observation contributes to
    the trimmed mean iff r lies in the closed interval [a, b], where the
    half-integer endpoints accommodate non-integer rank estimates. The
    contribution is scaled by `normalizer` so the weighted average over all
    n nodes reproduces the trimmed mean.
    """

    alpha: float
    n: int
    m: int = field(init=False)
    a: float = field(init=False)
    b: float = field(init=False)
    normalizer: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ParameterError("alpha must lie in (0, 1/2)")
        m = int(math.floor(self.alpha * self.n))
        if self.n - 2 * m <= 0:
            raise ParameterError("trim level removes all observations")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "a", m + 0.5)
        object.__setattr__(self, "b", self.n - m + 0.5)
        object.__setattr__(self, "normalizer", self.n / (self.n - 2 * m))


def true_ranks(d: Dataset) -> np.ndarray:
    """Exact ranks, ascending from 1; tied values receive their mid-rank."""
    return rankdata(d.values, method="average")


def trimmed_mean(d: Dataset, t: TrimSpec) -> float:
    """Sort-and-average oracle: mean of the order statistics m+1 ... n-m."""
    if t.n != d.n:
        raise ParameterError("trim spec built for a different n")
    if d.has_ties():
        raise TiesError("trimmed_mean oracle needs tie-free values; jitter the data first")
    xs = np.sort(d.values)
    inner = xs[t.m : d.n - t.m]
    return float(inner.mean())


def weight(r, t: TrimSpec):
    """Weighted-average form: normalizer if a <= r <= b (closed), else 0.

    Accepts scalars or arrays of (possibly non-integer) rank estimates.
    """
    r = np.asarray(r, dtype=np.float64)
    w = np.where((r >= t.a) & (r <= t.b), t.normalizer, 0.0)
    return float(w) if w.ndim == 0 else w


def contaminate(d: Dataset, spec: ContaminationSpec) -> Dataset:
    """Corrupt floor(epsilon*n) uniformly chosen values; seeded, flags set."""
    count = int(math.floor(spec.epsilon * d.n))
    if count == 0:
        warnings.warn("floor(epsilon*n) = 0: contamination has no effect", stacklevel=2)
        return d
    rng = np.random.default_rng(spec.seed)
    picks = rng.choice(d.n, size=count, replace=False)
    values = d.values.copy()
    if spec.mode == "scale":
        values[picks] *= spec.magnitude
    else:
        values[picks] += spec.magnitude
    corrupted = d.corrupted.copy()
    corrupted[picks] = True
    return Dataset(values=values, corrupted=corrupted)


def _haversine_km(lat1, lon1, lat2, lon2) -> float:
    rad = math.pi / 180.0
    dlat = (lat2 - lat1) * rad
    dlon = (lon2 - lon1) * rad
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1 * rad) * math.cos(lat2 * rad) * math.sin(dlon / 2) ** 2
    return 2.0 * 6371.0 * math.asin(math.sqrt(h))


def _largest_component(n: int, edges: np.ndarray) -> np.ndarray:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(int(v))
        adj[v].append(int(u))
    comp = np.full(n, -1, dtype=np.int64)
    label = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = label
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = label
                    stack.append(v)
        label += 1
    sizes = np.bincount(comp)
    return comp == int(np.argmax(sizes))


def load_csv(path, radius_km: float = 1.0, jitter: bool = False,
             jitter_seed: int = 0) -> tuple[Dataset, Graph | None]:
    """Load `node_id,value[,lat,lon]` rows; build a proximity graph when coordinates exist.

    Sensors within `radius_km` of each other (haversine) are connected. If the
    proximity graph is disconnected only the largest connected component is
    kept (with a warning), re-indexing nodes contiguously. `jitter` adds a
    deterministic perturbation of 1e-9 times the data range to break ties.
    """
    values, lats, lons = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file") from None
        cols = [h.strip().lower() for h in header]
        if cols[:2] != ["node_id", "value"]:
            raise ParseError("header must start with 'node_id,value'", line=1)
        has_coords = cols[2:4] == ["lat", "lon"]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                node_id = int(row[0])
                values.append(float(row[1]))
                if has_coords:
                    lats.append(float(row[2]))
                    lons.append(float(row[3]))
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), line=lineno) from None
            if node_id != len(values) - 1:
                raise ParseError(f"node ids must be 0-based and contiguous, got {node_id}",
                                 line=lineno)
    if not values:
        raise ParseError("no data rows")
    vals = np.array(values, dtype=np.float64)
    if jitter:
        rng = np.random.default_rng(jitter_seed)
        span = float(np.ptp(vals)) or 1.0
        vals = vals + rng.uniform(-1.0, 1.0, size=vals.size) * 1e-9 * span
    dataset = Dataset(values=vals)
    if not has_coords:
        return dataset, None
    n = vals.size
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if _haversine_km(lats[i], lons[i], lats[j], lons[j]) <= radius_km]
    earr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    keep = _largest_component(n, earr)
    if not keep.all():
        warnings.warn(f"proximity graph disconnected; keeping largest component "
                      f"({int(keep.sum())}/{n} nodes)", stacklevel=2)
        newid = np.cumsum(keep) - 1
        mask = keep[earr[:, 0]] & keep[earr[:, 1]]
        earr = newid[earr[mask]]
        dataset = Dataset(values=dataset.values[keep], corrupted=dataset.corrupted[keep])
    return dataset, Graph(n=dataset.n, edges=earr)


def jittered(d: Dataset, seed: int = 0) -> Dataset:
    """Tie-breaking helper: perturb values by 1e-9 of the data range, seeded."""
    rng = np.random.default_rng(seed)
    span = float(np.ptp(d.values)) or 1.0
    return replace(d, values=d.values + rng.uniform(-1.0, 1.0, size=d.n) * 1e-9 * span)
