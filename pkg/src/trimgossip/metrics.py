"""Error metrics, closed-form expectation oracles, and bound evaluators.

The convergence analysis of the rank/trim protocols reduces to explicit
finite-sample inequalities. This module turns each of them into an
evaluator so they can be asserted against exact oracles or Monte Carlo
estimates:

- expected trajectories of the swap- and averaging-driven protocols, via
  eigendecomposition of the expected transition matrices;
- the per-node rank-error bound sigma_k/(c t) and its second-moment and
  absolute-deviation companions;
- the weight-convergence bound and the trimmed-mean estimate bound with its
  applicability threshold t*;
- the probabilistic breakdown-point window of the running trimmed mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, TrimSpec, true_ranks
from .errors import ParameterError, TiesError
from .graphs import Graph, SpectralInfo, laplacian, spectral_info

__all__ = [
    "rank_error",
    "trim_error",
    "comparison_matrix",
    "expected_rank_oracle",
    "expected_average_oracle",
    "BoundParams",
    "phi",
    "rank_gap_bound",
    "rank_moment_bounds",
    "weight_gap_bound",
    "trim_gap_bound",
    "breakdown_bounds",
    "t_star",
    "swap_event_matrix",
    "average_event_matrix",
    "expected_event_matrix",
]

DENSE_ORACLE_LIMIT = 200


# ---------------------------------------------------------------------------
# error metrics
# ---------------------------------------------------------------------------

def rank_error(estimates, ranks) -> tuple[np.ndarray, float]:
    """Normalized per-node rank errors |R_k - r_k| / n and their network mean."""
    est = np.asarray(estimates, dtype=np.float64)
    r = np.asarray(ranks, dtype=np.float64)
    if est.shape != r.shape:
        raise ParameterError("estimate and rank vectors differ in length")
    err = np.abs(est - r) / r.shape[-1]
    return err, float(err.mean())


def trim_error(estimates, target: float) -> float:
    """Network-average absolute deviation of the estimates from the oracle value."""
    est = np.asarray(estimates, dtype=np.float64)
    return float(np.abs(est - target).mean())


# ---------------------------------------------------------------------------
# expectation oracles
# ---------------------------------------------------------------------------

def comparison_matrix(values) -> np.ndarray:
    """Pairwise comparison indicators: H[k, l] = 1 iff X_k > X_l."""
    x = np.asarray(values, dtype=np.float64)
    return (x[:, None] > x[None, :]).astype(np.float64)


def _eig_expected(g: Graph, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    if g.n > DENSE_ORACLE_LIMIT:
        raise ParameterError(f"dense oracle limited to n <= {DENSE_ORACLE_LIMIT}")
    w = np.eye(g.n) - laplacian(g) / (alpha * g.num_edges)
    vals, vecs = np.linalg.eigh(w)
    return vals, vecs


def expected_rank_oracle(g: Graph, values, times) -> np.ndarray:
    """Exact E[R_k(t)] for the synchronous ranker, for each requested t.

    Evaluates n/t * sum_{s<t} h_k' W1^s e_k + 1 through the eigendecomposition
    of the expected swap matrix W1, which keeps the Cesaro sum stable for
    arbitrarily large t. Returns an array of shape (len(times), n).
    """
    times = np.atleast_1d(np.asarray(times, dtype=np.int64))
    if (times < 1).any():
        raise ParameterError("oracle times must be >= 1")
    h = comparison_matrix(values)
    n = g.n
    vals, vecs = _eig_expected(g, alpha=1)
    out = np.empty((times.size, n))
    hv = h @ vecs              # rows: h_k' V
    for idx, t in enumerate(times):
        t = int(t)
        near_one = np.abs(1.0 - vals) < 1e-14
        gs = np.where(near_one, float(t), (1.0 - vals ** t) / np.where(near_one, 1.0, 1.0 - vals))
        # E[R'_k(t)] = (1/t) * h_k' V diag(gs) V' e_k
        comp = np.einsum("kj,j,kj->k", hv, gs, vecs) / t
        out[idx] = n * comp + 1.0
    return out


def expected_average_oracle(g: Graph, x0, times) -> np.ndarray:
    """Exact E[x(t)] = W2^t x0 for pairwise averaging, shape (len(times), n)."""
    times = np.atleast_1d(np.asarray(times, dtype=np.int64))
    if (times < 0).any():
        raise ParameterError("oracle times must be >= 0")
    x0 = np.asarray(x0, dtype=np.float64)
    vals, vecs = _eig_expected(g, alpha=2)
    proj = vecs.T @ x0
    out = np.empty((times.size, g.n))
    for idx, t in enumerate(times):
        out[idx] = vecs @ (vals ** int(t) * proj)
    return out


# ---------------------------------------------------------------------------
# bound constants and evaluators
# ---------------------------------------------------------------------------

def phi(u):
    """Score generating function sqrt(u * (1 - u)) on [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    out = np.sqrt(np.clip(u * (1.0 - u), 0.0, None))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundParams:
    """Graph- and data-dependent constants entering every bound."""

    n: int
    c: float                 # connectivity constant lambda2 / |E|
    ranks: np.ndarray        # exact integer ranks
    sigma: np.ndarray        # per-node n^{3/2} * phi((r_k - 1) / n)

    @classmethod
    def from_data(cls, g: Graph, d: Dataset, info: SpectralInfo | None = None) -> BoundParams:
        r = true_ranks(d)
        if not np.array_equal(r, np.round(r)):
            raise TiesError("bound constants require tie-free (integer-rank) data")
        info = info if info is not None else spectral_info(g)
        n = d.n
        sigma = n ** 1.5 * phi((r - 1.0) / n)
        return cls(n=n, c=info.c, ranks=r, sigma=sigma)

    def gamma(self, trim: TrimSpec) -> np.ndarray:
        """Distance of each exact rank to the nearer inclusion-interval endpoint."""
        return np.minimum(np.abs(self.ranks - trim.a), np.abs(self.ranks - trim.b))

    def c_m(self, trim: TrimSpec) -> float:
        """sqrt(3) * n^{3/2} * phi((m - 1) / n), the worst-case constant over cut ranks."""
        if trim.m < 1:
            raise ParameterError("breakdown constants need at least one trimmed value")
        return math.sqrt(3.0) * self.n ** 1.5 * phi((trim.m - 1.0) / self.n)

    def k_delta(self, trim: TrimSpec, delta: float) -> float:
        if not 0.0 < delta < 1.0:
            raise ParameterError("delta must lie in (0, 1)")
        return self.c_m(trim) / ((1.0 - 1.0 / self.n) * math.sqrt(self.c) * delta)

    def propagation_time(self, tau: float, delta: float, values) -> float:
        """(4/c) log(n / (eps * delta)) with eps = tau / max |X_k|."""
        if tau <= 0:
            raise ParameterError("tau must be positive")
        eps = tau / float(np.max(np.abs(values)))
        return (4.0 / self.c) * math.log(self.n / (eps * delta))


def rank_gap_bound(params: BoundParams, t: int) -> np.ndarray:
    """Per-node bound sigma_k / (c t) on |E[R_k(t)] - r_k|."""
    if t < 1:
        raise ParameterError("t must be >= 1")
    return params.sigma / (params.c * t)


def rank_moment_bounds(params: BoundParams, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Bounds 3 sigma_k^2 / (c t) on E[(R_k - r_k)^2] and sqrt(3/(c t)) sigma_k on E|R_k - r_k|."""
    if t < 1:
        raise ParameterError("t must be >= 1")
    second = 3.0 * params.sigma ** 2 / (params.c * t)
    absolute = math.sqrt(3.0 / (params.c * t)) * params.sigma
    return second, absolute


def weight_gap_bound(params: BoundParams, trim: TrimSpec, t: int) -> np.ndarray:
    """Per-node bound (3/(c t)) sigma_k^2 / (gamma_k^2 (1 - 2 alpha)) on the weight gap."""
    if t < 1:
        raise ParameterError("t must be >= 1")
    gam = params.gamma(trim)
    return 3.0 * params.sigma ** 2 / (params.c * t * gam ** 2 * (1.0 - 2.0 * trim.alpha))


def t_star(c: float) -> int:
    """Smallest integer t > 1 with c t > 2 log t (applicability threshold)."""
    if c <= 0:
        raise ParameterError("t_star needs c > 0")

    def ok(t: int) -> bool:
        return c * t > 2.0 * math.log(t)

    hi = 2
    while not ok(hi):
        hi *= 2
        if hi > 1 << 62:
            raise ParameterError("no applicability threshold found (c too small)")
    lo = hi // 2  # ok(hi) and (hi == 2 or not ok(lo))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return max(hi, 2)


def trim_gap_bound(params: BoundParams, trim: TrimSpec, values, t: int) -> float | None:
    """Bound on ||E[Z(t)] - xbar_alpha 1||; None below the threshold t*.

    Uses the explicit constant (5/(ct) + 4/(ct - 2 log t)) * 3/(c (1 - 2 alpha))
    applied to the norm of the rank-mask K = sigma^2 / gamma^2 times the data.
    """
    if t <= t_star(params.c):
        return None
    gam = params.gamma(trim)
    mask = params.sigma ** 2 / gam ** 2
    kx = float(np.linalg.norm(mask * np.asarray(values, dtype=np.float64)))
    c = params.c
    lead = 5.0 / (c * t) + 4.0 / (c * t - 2.0 * math.log(t))
    return lead * 3.0 / (c * (1.0 - 2.0 * trim.alpha)) * kx


def breakdown_bounds(params: BoundParams, trim: TrimSpec, tau: float, delta: float,
                     t: int, values) -> tuple[float, float] | None:
    """(lower, upper) framing of the tau-breakdown point at round t; None if t <= T_prop.

    upper is the trimmed mean's own breakdown point m/n; lower climbs toward
    it as the rank estimates stabilize, at speed K(delta)/sqrt(t - T_prop).
    """
    t_prop = params.propagation_time(tau, delta, values)
    if t <= t_prop:
        return None
    k = params.k_delta(trim, delta)
    lower = max(math.floor(trim.m + 0.5 - k / math.sqrt(t - t_prop)), 0) / params.n
    upper = trim.m / params.n
    return lower, upper


# ---------------------------------------------------------------------------
# event matrices (swap / averaging) for the transition-matrix identities
# ---------------------------------------------------------------------------

def _elementary(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((n, n))
    e[i, i] = e[j, j] = 1.0
    e[i, j] = e[j, i] = -1.0
    return e


def swap_event_matrix(n: int, i: int, j: int) -> np.ndarray:
    """Permutation matrix exchanging coordinates i and j (an involution)."""
    return np.eye(n) - _elementary(n, i, j)


def average_event_matrix(n: int, i: int, j: int) -> np.ndarray:
    """Projection replacing coordinates i and j by their mean (idempotent)."""
    return np.eye(n) - 0.5 * _elementary(n, i, j)


def expected_event_matrix(g: Graph, alpha: int) -> np.ndarray:
    """E over uniform edges of the event matrix: identity minus L / (alpha |E|)."""
    if alpha not in (1, 2):
        raise ParameterError("alpha must be 1 (swap) or 2 (averaging)")
    return np.eye(g.n) - laplacian(g) / (alpha * g.num_edges)
