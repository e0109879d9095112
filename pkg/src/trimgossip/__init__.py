"""Gossip protocols for decentralized rank and robust trimmed-mean estimation.

The package couples three layers:

- `graphs` / `data`: communication topologies with their spectral constants,
  and observations with exact centralized oracles (ranks, trimmed mean);
- `protocols` / `engine`: the gossip state machines and the seeded,
  reproducible trial/ensemble runner (compiled kernels with a pure-Python
  fallback, see `backend`);
- `metrics`: expectation oracles and evaluators for every convergence and
  breakdown bound, so the theory is checkable against simulation.

`cli` exposes the experiment harness (`trimgossip` console script).
"""

__version__ = "0.1.0"

from . import backend
from .data import ContaminationSpec, Dataset, TrimSpec, contaminate, range_dataset
from .engine import EdgeSampler, TrialRecorder, run_ensemble, run_trial
from .graphs import Graph, TopologySpec, build_graph, spectral_info, validate
from .protocols import (
    AsyncGoRank,
    BaselinePP,
    TokenBaseline,
    ClippedGossip,
    GoRank,
    GossipAverage,
    GoTrim,
    SizeEstimation,
    make_protocol,
)

__all__ = [
    "__version__",
    "backend",
    "ContaminationSpec",
    "Dataset",
    "TrimSpec",
    "contaminate",
    "range_dataset",
    "EdgeSampler",
    "TrialRecorder",
    "run_ensemble",
    "run_trial",
    "Graph",
    "TopologySpec",
    "build_graph",
    "spectral_info",
    "validate",
    "GoRank",
    "AsyncGoRank",
    "TokenBaseline",
    "BaselinePP",
    "GoTrim",
    "GossipAverage",
    "ClippedGossip",
    "SizeEstimation",
    "make_protocol",
]
