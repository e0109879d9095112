"""Pure-Python/numpy fallback for the compiled kernels.

Same functions, same in-place semantics as `_kernels`. All-node phases are
vectorized with numpy using the identical elementwise expression trees, and
pairwise updates use identical scalar arithmetic, so trajectories produced
by the two backends match bit for bit. The differences are speed (see
benchmarks/bench_backends.py) and the bookkeeping accumulators, which here
use numpy sums instead of naive loops and may round differently in their
reported diagnostic (not in any state).
"""

from __future__ import annotations

import numpy as np


def gorank_sync(x, y, comp, rank, s0, ei, ej):
    n = x.shape[0]
    for b in range(ei.shape[0]):
        inv = 1.0 / (s0 + b)
        ind = (x > y).astype(np.float64)
        comp[:] = (1.0 - inv) * comp + inv * ind
        rank[:] = n * comp + 1.0
        i = ei[b]
        if i >= 0:
            j = ej[b]
            y[i], y[j] = y[j], y[i]


def gorank_async(x, y, comp, rank, counts, ei, ej):
    n = float(x.shape[0])
    for b in range(ei.shape[0]):
        i = int(ei[b])
        if i < 0:
            continue
        j = int(ej[b])
        for p in (i, j):
            counts[p] += 1
            inv = 1.0 / counts[p]
            ind = 1.0 if x[p] > y[p] else 0.0
            comp[p] = (1.0 - inv) * comp[p] + inv * ind
            rank[p] = n * comp[p] + 1.0
        y[i], y[j] = y[j], y[i]


def baseline_token(x, rank, tok_rank, tok_val, tok_id, ei, ej, target, stop_on_hit):
    n = x.shape[0]
    check = target.shape[0] == n
    hit = 0
    for b in range(ei.shape[0]):
        i = int(ei[b])
        if i >= 0:
            j = int(ej[b])
            if (x[i] - x[j]) * float(rank[i] - rank[j]) < 0.0:
                rank[i], rank[j] = rank[j], rank[i]
            if (tok_val[i] - tok_val[j]) * float(tok_rank[i] - tok_rank[j]) < 0.0:
                tok_rank[i], tok_rank[j] = tok_rank[j], tok_rank[i]
            tok_id[i], tok_id[j] = tok_id[j], tok_id[i]
            tok_rank[i], tok_rank[j] = tok_rank[j], tok_rank[i]
            tok_val[i], tok_val[j] = tok_val[j], tok_val[i]
            for p in (i, j):
                if tok_id[p] == p:
                    rank[p] = tok_rank[p]
        if check and hit == 0 and np.array_equal(rank, target):
            hit = b + 1
            if stop_on_hit:
                return hit
    return hit


def baselinepp(x, rank, aux_rank, aux_val, ei, ej, target, stop_on_hit):
    n = x.shape[0]
    check = target.shape[0] == n
    hit = 0
    for b in range(ei.shape[0]):
        i = int(ei[b])
        if i >= 0:
            j = int(ej[b])
            if (aux_val[i] - aux_val[j]) * float(aux_rank[i] - aux_rank[j]) < 0.0:
                aux_rank[i], aux_rank[j] = aux_rank[j], aux_rank[i]
            for p in (i, j):
                if (aux_val[p] - x[p]) * float(aux_rank[p] - rank[p]) < 0.0 or aux_val[p] == x[p]:
                    rank[p] = aux_rank[p]
            aux_rank[i], aux_rank[j] = aux_rank[j], aux_rank[i]
            aux_val[i], aux_val[j] = aux_val[j], aux_val[i]
        if check and hit == 0 and np.array_equal(rank, target):
            hit = b + 1
            if stop_on_hit:
                return hit
    return hit


def gotrim_gorank_sync(x, y, comp, rank, est, wgt, s0, ei, ej, a, b_right, norm, track):
    n = x.shape[0]
    max_dev = 0.0
    for b in range(ei.shape[0]):
        inv = 1.0 / (s0 + b)
        ind = (x > y).astype(np.float64)
        comp[:] = (1.0 - inv) * comp + inv * ind
        rank[:] = n * comp + 1.0
        wp = np.where((rank >= a) & (rank <= b_right), norm, 0.0)
        est[:] = est + (wp - wgt) * x
        wgt[:] = wp
        i = ei[b]
        if i >= 0:
            j = ej[b]
            mid = (est[i] + est[j]) * 0.5
            est[i] = mid
            est[j] = mid
            y[i], y[j] = y[j], y[i]
        if track:
            swx = float(np.dot(wgt, x))
            dev = abs(float(est.sum()) - swx) / max(1.0, abs(swx))
            if dev > max_dev:
                max_dev = dev
    return max_dev


def gotrim_baselinepp(x, rank, aux_rank, aux_val, est, wgt, ei, ej, a, b_right, norm, track):
    max_dev = 0.0
    for b in range(ei.shape[0]):
        rk = rank.astype(np.float64)
        wp = np.where((rk >= a) & (rk <= b_right), norm, 0.0)
        est[:] = est + (wp - wgt) * x
        wgt[:] = wp
        i = int(ei[b])
        if i >= 0:
            j = int(ej[b])
            mid = (est[i] + est[j]) * 0.5
            est[i] = mid
            est[j] = mid
            if (aux_val[i] - aux_val[j]) * float(aux_rank[i] - aux_rank[j]) < 0.0:
                aux_rank[i], aux_rank[j] = aux_rank[j], aux_rank[i]
            for p in (i, j):
                if (aux_val[p] - x[p]) * float(aux_rank[p] - rank[p]) < 0.0 or aux_val[p] == x[p]:
                    rank[p] = aux_rank[p]
            aux_rank[i], aux_rank[j] = aux_rank[j], aux_rank[i]
            aux_val[i], aux_val[j] = aux_val[j], aux_val[i]
        if track:
            swx = float(np.dot(wgt, x))
            dev = abs(float(est.sum()) - swx) / max(1.0, abs(swx))
            if dev > max_dev:
                max_dev = dev
    return max_dev


def gossip_average(est, ei, ej):
    for b in range(ei.shape[0]):
        i = ei[b]
        if i < 0:
            continue
        j = ej[b]
        mid = (est[i] + est[j]) * 0.5
        est[i] = mid
        est[j] = mid


def clipped_gossip(est, tau, ei, ej):
    for b in range(ei.shape[0]):
        i = int(ei[b])
        if i < 0:
            continue
        j = int(ej[b])
        xi = float(est[i])
        xj = float(est[j])
        z = xj - xi
        az = abs(z)
        d = z if az <= tau else tau * (z / az)
        est[i] = xi + 0.5 * d
        z = xi - xj
        az = abs(z)
        d = z if az <= tau else tau * (z / az)
        est[j] = xj + 0.5 * d
