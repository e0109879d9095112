# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the gossip protocols.

Each function advances one trial's node-state arrays in place over a block
of rounds whose pre-sampled edge endpoints are given by (ei, ej); an entry
ei[b] < 0 means no edge fired that round (edge-failure mode). Semantics
must match `_pykernels` exactly, operation for operation, so that the two
backends produce bit-identical trajectories.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def gorank_sync(double[::1] x, double[::1] y, double[::1] comp, double[::1] rank,
                i64 s0, i64[::1] ei, i64[::1] ej):
    """Synchronous rank estimation: all-node running comparison update, then one swap."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b, k
    cdef double inv, ind, tmp
    cdef double dn = <double> n
    cdef i64 i, j
    for b in range(nb):
        inv = 1.0 / <double> (s0 + b)
        for k in range(n):
            ind = 1.0 if x[k] > y[k] else 0.0
            comp[k] = (1.0 - inv) * comp[k] + inv * ind
            rank[k] = dn * comp[k] + 1.0
        i = ei[b]
        if i >= 0:
            j = ej[b]
            tmp = y[i]; y[i] = y[j]; y[j] = tmp


def gorank_async(double[::1] x, double[::1] y, double[::1] comp, double[::1] rank,
                 i64[::1] counts, i64[::1] ei, i64[::1] ej):
    """Asynchronous variant: only the sampled endpoints update, using local counters."""
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b, t
    cdef double inv, ind, tmp
    cdef double dn = <double> x.shape[0]
    cdef i64 i, j, p
    for b in range(nb):
        i = ei[b]
        if i < 0:
            continue
        j = ej[b]
        for t in range(2):
            p = i if t == 0 else j
            counts[p] += 1
            inv = 1.0 / <double> counts[p]
            ind = 1.0 if x[p] > y[p] else 0.0
            comp[p] = (1.0 - inv) * comp[p] + inv * ind
            rank[p] = dn * comp[p] + 1.0
        tmp = y[i]; y[i] = y[j]; y[j] = tmp


def baseline_token(double[::1] x, i64[::1] rank, i64[::1] tok_rank, double[::1] tok_val,
                    i64[::1] tok_id, i64[::1] ei, i64[::1] ej,
                    i64[::1] target, bint stop_on_hit):
    """Token-passing ranking baseline; returns the first 1-based round where
    rank == target (0 if never; target may be empty to disable the check)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b, k
    cdef bint check = target.shape[0] == n
    cdef bint ok
    cdef i64 i, j, p, t64, hit = 0
    cdef i64 itmp
    cdef double dtmp
    for b in range(nb):
        i = ei[b]
        if i >= 0:
            j = ej[b]
            if (x[i] - x[j]) * (<double> rank[i] - <double> rank[j]) < 0.0:
                itmp = rank[i]; rank[i] = rank[j]; rank[j] = itmp
            if (tok_val[i] - tok_val[j]) * (<double> tok_rank[i] - <double> tok_rank[j]) < 0.0:
                itmp = tok_rank[i]; tok_rank[i] = tok_rank[j]; tok_rank[j] = itmp
            itmp = tok_id[i]; tok_id[i] = tok_id[j]; tok_id[j] = itmp
            itmp = tok_rank[i]; tok_rank[i] = tok_rank[j]; tok_rank[j] = itmp
            dtmp = tok_val[i]; tok_val[i] = tok_val[j]; tok_val[j] = dtmp
            for t64 in range(2):
                p = i if t64 == 0 else j
                if tok_id[p] == p:
                    rank[p] = tok_rank[p]
        if check and hit == 0:
            ok = True
            for k in range(n):
                if rank[k] != target[k]:
                    ok = False
                    break
            if ok:
                hit = b + 1
                if stop_on_hit:
                    return hit
    return hit


def baselinepp(double[::1] x, i64[::1] rank, i64[::1] aux_rank, double[::1] aux_val,
               i64[::1] ei, i64[::1] ej, i64[::1] target, bint stop_on_hit):
    """Auxiliary-swap ranking baseline; returns first hit round like baseline_token."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b, k
    cdef bint check = target.shape[0] == n
    cdef bint ok
    cdef i64 i, j, p, t64, hit = 0
    cdef i64 itmp
    cdef double dtmp
    for b in range(nb):
        i = ei[b]
        if i >= 0:
            j = ej[b]
            if (aux_val[i] - aux_val[j]) * (<double> aux_rank[i] - <double> aux_rank[j]) < 0.0:
                itmp = aux_rank[i]; aux_rank[i] = aux_rank[j]; aux_rank[j] = itmp
            for t64 in range(2):
                p = i if t64 == 0 else j
                if (aux_val[p] - x[p]) * (<double> aux_rank[p] - <double> rank[p]) < 0.0 \
                        or aux_val[p] == x[p]:
                    rank[p] = aux_rank[p]
            itmp = aux_rank[i]; aux_rank[i] = aux_rank[j]; aux_rank[j] = itmp
            dtmp = aux_val[i]; aux_val[i] = aux_val[j]; aux_val[j] = dtmp
        if check and hit == 0:
            ok = True
            for k in range(n):
                if rank[k] != target[k]:
                    ok = False
                    break
            if ok:
                hit = b + 1
                if stop_on_hit:
                    return hit
    return hit


def gotrim_gorank_sync(double[::1] x, double[::1] y, double[::1] comp, double[::1] rank,
                       double[::1] est, double[::1] wgt, i64 s0, i64[::1] ei, i64[::1] ej,
                       double a, double b_right, double norm, bint track):
    """Trimmed-mean estimation fused with the synchronous ranker.

    Per round: ranker update, weight refresh with compensating injection into
    the running estimate, then one pairwise-averaging edge event plus ranker
    swap. When `track` is set, returns the worst relative deviation of
    sum(est) from sum(wgt * x) seen after any round (the bookkeeping
    identity both sides of every injection and averaging step preserve).
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b, k
    cdef double inv, ind, tmp, wp, sz, swx, dev, denom
    cdef double dn = <double> n
    cdef double max_dev = 0.0
    cdef i64 i, j
    for b in range(nb):
        inv = 1.0 / <double> (s0 + b)
        for k in range(n):
            ind = 1.0 if x[k] > y[k] else 0.0
            comp[k] = (1.0 - inv) * comp[k] + inv * ind
            rank[k] = dn * comp[k] + 1.0
            wp = norm if (rank[k] >= a and rank[k] <= b_right) else 0.0
            est[k] = est[k] + (wp - wgt[k]) * x[k]
            wgt[k] = wp
        i = ei[b]
        if i >= 0:
            j = ej[b]
            tmp = (est[i] + est[j]) * 0.5
            est[i] = tmp; est[j] = tmp
            tmp = y[i]; y[i] = y[j]; y[j] = tmp
        if track:
            sz = 0.0
            swx = 0.0
            for k in range(n):
                sz += est[k]
                swx += wgt[k] * x[k]
            denom = swx if swx >= 0.0 else -swx
            if denom < 1.0:
                denom = 1.0
            dev = sz - swx
            if dev < 0.0:
                dev = -dev
            dev = dev / denom
            if dev > max_dev:
                max_dev = dev
    return max_dev


def gotrim_baselinepp(double[::1] x, i64[::1] rank, i64[::1] aux_rank, double[::1] aux_val,
                      double[::1] est, double[::1] wgt, i64[::1] ei, i64[::1] ej,
                      double a, double b_right, double norm, bint track):
    """Trimmed-mean estimation fused with the auxiliary-swap ranking baseline."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b, k
    cdef double wp, tmp, sz, swx, dev, denom, rk
    cdef double max_dev = 0.0
    cdef i64 i, j, p, t64, itmp
    cdef double dtmp
    for b in range(nb):
        for k in range(n):
            rk = <double> rank[k]
            wp = norm if (rk >= a and rk <= b_right) else 0.0
            est[k] = est[k] + (wp - wgt[k]) * x[k]
            wgt[k] = wp
        i = ei[b]
        if i >= 0:
            j = ej[b]
            tmp = (est[i] + est[j]) * 0.5
            est[i] = tmp; est[j] = tmp
            if (aux_val[i] - aux_val[j]) * (<double> aux_rank[i] - <double> aux_rank[j]) < 0.0:
                itmp = aux_rank[i]; aux_rank[i] = aux_rank[j]; aux_rank[j] = itmp
            for t64 in range(2):
                p = i if t64 == 0 else j
                if (aux_val[p] - x[p]) * (<double> aux_rank[p] - <double> rank[p]) < 0.0 \
                        or aux_val[p] == x[p]:
                    rank[p] = aux_rank[p]
            itmp = aux_rank[i]; aux_rank[i] = aux_rank[j]; aux_rank[j] = itmp
            dtmp = aux_val[i]; aux_val[i] = aux_val[j]; aux_val[j] = dtmp
        if track:
            sz = 0.0
            swx = 0.0
            for k in range(n):
                sz += est[k]
                swx += wgt[k] * x[k]
            denom = swx if swx >= 0.0 else -swx
            if denom < 1.0:
                denom = 1.0
            dev = sz - swx
            if dev < 0.0:
                dev = -dev
            dev = dev / denom
            if dev > max_dev:
                max_dev = dev
    return max_dev


def gossip_average(double[::1] est, i64[::1] ei, i64[::1] ej):
    """Pairwise averaging: the sampled endpoints both move to their midpoint."""
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b
    cdef double tmp
    cdef i64 i, j
    for b in range(nb):
        i = ei[b]
        if i < 0:
            continue
        j = ej[b]
        tmp = (est[i] + est[j]) * 0.5
        est[i] = tmp; est[j] = tmp


def clipped_gossip(double[::1] est, double tau, i64[::1] ei, i64[::1] ej):
    """Pairwise averaging with each half-step clipped to radius tau."""
    cdef Py_ssize_t nb = ei.shape[0]
    cdef Py_ssize_t b
    cdef double xi, xj, z, az, d
    cdef i64 i, j
    for b in range(nb):
        i = ei[b]
        if i < 0:
            continue
        j = ej[b]
        xi = est[i]; xj = est[j]
        z = xj - xi
        az = z if z >= 0.0 else -z
        d = z if az <= tau else tau * (z / az)
        est[i] = xi + 0.5 * d
        z = xi - xj
        az = z if z >= 0.0 else -z
        d = z if az <= tau else tau * (z / az)
        est[j] = xj + 0.5 * d
