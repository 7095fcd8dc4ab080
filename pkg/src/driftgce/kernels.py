"""Numeric hot kernels with numba-accelerated and pure-numpy twins.

Three inner loops dominate pipeline runtime: the full pairwise distance
matrix, Gaussian KDE log-density evaluation for graph edge weights, and
the agglomerative merge loop that reduces per-instance counterfactuals
to k groups. Each kernel exists in two implementations with identical
semantics:

    <name>_numpy   always available
    <name>_numba   compiled with @njit when numba is importable

The module-level names (``pairwise_dists``, ``kde_log_density``,
``glance_merge``) dispatch to the numba build unless numba is missing
or the environment variable ``DRIFTGCE_NO_NUMBA`` is set to a non-empty
value, in which case the numpy path is used. ``BACKEND`` records which
path won. Both paths are kept importable so tests can assert parity and
benchmarks can compare them.

Merge-loop contract (shared with the brute-force oracle in the tests):
clusters start as singletons in input order; each step scans the upper
triangle in row-major order and merges the strictly smallest entry, so
ties resolve to the lexicographically smallest (i, j); the merged
cluster keeps slot i, slot j is removed by shifting later slots down;
merged centroid and direction vector are weight-proportional means and
weights add. Combined distance between clusters a and b is

    ||x_a - x_b||_2 + (1 - cos(v_a, v_b))

where the cosine term is fixed at 1 (neutral) if either direction
vector has zero norm. No fastmath is enabled. The merge loop's outputs
agree exactly across the two paths; the distance and KDE kernels agree
to float round-off (numpy's pairwise summation vs the sequential jit
loop), so cross-backend merges could in principle diverge on an exact
tie. Within one backend everything is bit-reproducible.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# pairwise Euclidean distances


def pairwise_dists_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense (len(a), len(b)) matrix of Euclidean distances."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@njit(cache=True)
def _pairwise_dists_jit(a, b):  # pragma: no cover - numba build
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(d):
                dx = a[i, t] - b[j, t]
                s += dx * dx
            out[i, j] = math.sqrt(s)
    return out


def pairwise_dists_numba(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _pairwise_dists_jit(
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# Gaussian KDE log-density


def kde_log_density_numpy(queries: np.ndarray, data: np.ndarray, bandwidth: float) -> np.ndarray:
    """Log-density of an isotropic Gaussian KDE at each query point.

    Evaluated with a max-shift (logsumexp) so sparse regions underflow
    to very negative logs instead of -inf.
    """
    n, d = data.shape
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    diff = queries[:, None, :] - data[None, :, :]
    expo = -np.einsum("ijk,ijk->ij", diff, diff) * inv
    m = expo.max(axis=1)
    s = np.exp(expo - m[:, None]).sum(axis=1)
    norm = math.log(n) + d * math.log(bandwidth) + 0.5 * d * _LOG_2PI
    return m + np.log(s) - norm


@njit(cache=True)
def _kde_log_density_jit(queries, data, bandwidth):  # pragma: no cover - numba build
    nq, d = queries.shape
    n = data.shape[0]
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    norm = math.log(n) + d * math.log(bandwidth) + 0.5 * d * _LOG_2PI
    out = np.empty(nq, dtype=np.float64)
    expo = np.empty(n, dtype=np.float64)
    for i in range(nq):
        m = -np.inf
        for j in range(n):
            s = 0.0
            for t in range(d):
                dx = queries[i, t] - data[j, t]
                s += dx * dx
            e = -s * inv
            expo[j] = e
            if e > m:
                m = e
        acc = 0.0
        for j in range(n):
            acc += math.exp(expo[j] - m)
        out[i] = m + math.log(acc) - norm
    return out


def kde_log_density_numba(queries: np.ndarray, data: np.ndarray, bandwidth: float) -> np.ndarray:
    return _kde_log_density_jit(
        np.ascontiguousarray(queries, dtype=np.float64),
        np.ascontiguousarray(data, dtype=np.float64),
        float(bandwidth),
    )


# ---------------------------------------------------------------------------
# agglomerative merge loop


def _combined_entry(xa, xb, va, vb):
    dx = xa - xb
    dist = math.sqrt(float(np.dot(dx, dx)))
    na = math.sqrt(float(np.dot(va, va)))
    nb = math.sqrt(float(np.dot(vb, vb)))
    if na == 0.0 or nb == 0.0:
        return dist + 1.0
    return dist + (1.0 - float(np.dot(va, vb)) / (na * nb))


def glance_merge_numpy(points, cfavs, k, trace=None):
    """Merge singleton (point, direction) clusters down to k groups.

    Returns (labels, centroids, group_cfavs, weights); labels map each
    input row to a final slot in 0..k-1. ``trace``, when a list, gets a
    dict per merge step with the surviving total weight so invariant
    tests can watch conservation.
    """
    pts = np.asarray(points, dtype=np.float64).copy()
    vecs = np.asarray(cfavs, dtype=np.float64).copy()
    m = pts.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    w = np.ones(m, dtype=np.float64)
    labels = np.arange(m, dtype=np.int64)

    dist = np.empty((m, m), dtype=np.float64)
    for i in range(m):
        dist[i, i] = np.inf
        for j in range(i + 1, m):
            dist[i, j] = _combined_entry(pts[i], pts[j], vecs[i], vecs[j])
            dist[j, i] = np.inf

    a = m
    while a > k:
        flat = np.argmin(dist[:a, :a])
        i, j = divmod(int(flat), a)
        wi, wj = w[i], w[j]
        tot = wi + wj
        pts[i] = (wi * pts[i] + wj * pts[j]) / tot
        vecs[i] = (wi * vecs[i] + wj * vecs[j]) / tot
        w[i] = tot
        labels[labels == j] = i
        labels[labels > j] -= 1
        # drop slot j, keeping order stable (copies guard slice overlap)
        if j < a - 1:
            pts[j : a - 1] = pts[j + 1 : a].copy()
            vecs[j : a - 1] = vecs[j + 1 : a].copy()
            w[j : a - 1] = w[j + 1 : a].copy()
            dist[j : a - 1, :a] = dist[j + 1 : a, :a].copy()
            dist[:a, j : a - 1] = dist[:a, j + 1 : a].copy()
        a -= 1
        for t in range(a):
            if t == i:
                continue
            lo, hi = (t, i) if t < i else (i, t)
            dist[lo, hi] = _combined_entry(pts[i], pts[t], vecs[i], vecs[t])
        if trace is not None:
            trace.append({"active": a, "total_weight": float(w[:a].sum())})
    return labels, pts[:k].copy(), vecs[:k].copy(), w[:k].copy()


@njit(cache=True)
def _glance_merge_jit(pts, vecs, k):  # pragma: no cover - numba build
    m, d = pts.shape
    w = np.ones(m, dtype=np.float64)
    labels = np.arange(m, dtype=np.int64)
    dist = np.full((m, m), np.inf, dtype=np.float64)
    for i in range(m):
        for j in range(i + 1, m):
            s = 0.0
            dot = 0.0
            na = 0.0
            nb = 0.0
            for t in range(d):
                dx = pts[i, t] - pts[j, t]
                s += dx * dx
                dot += vecs[i, t] * vecs[j, t]
                na += vecs[i, t] * vecs[i, t]
                nb += vecs[j, t] * vecs[j, t]
            base = math.sqrt(s)
            if na == 0.0 or nb == 0.0:
                dist[i, j] = base + 1.0
            else:
                dist[i, j] = base + (1.0 - dot / (math.sqrt(na) * math.sqrt(nb)))

    a = m
    while a > k:
        best = np.inf
        bi = 0
        bj = 1
        for i in range(a):
            for j in range(i + 1, a):
                if dist[i, j] < best:
                    best = dist[i, j]
                    bi = i
                    bj = j
        wi = w[bi]
        wj = w[bj]
        tot = wi + wj
        for t in range(d):
            pts[bi, t] = (wi * pts[bi, t] + wj * pts[bj, t]) / tot
            vecs[bi, t] = (wi * vecs[bi, t] + wj * vecs[bj, t]) / tot
        w[bi] = tot
        for p in range(m):
            if labels[p] == bj:
                labels[p] = bi
            if labels[p] > bj:
                labels[p] -= 1
        for j in range(bj, a - 1):
            for t in range(d):
                pts[j, t] = pts[j + 1, t]
                vecs[j, t] = vecs[j + 1, t]
            w[j] = w[j + 1]
        for j in range(bj, a - 1):
            for t in range(a):
                dist[j, t] = dist[j + 1, t]
        for i in range(a):
            for j in range(bj, a - 1):
                dist[i, j] = dist[i, j + 1]
        a -= 1
        for t in range(a):
            if t == bi:
                continue
            s = 0.0
            dot = 0.0
            na = 0.0
            nb = 0.0
            for u in range(d):
                dx = pts[bi, u] - pts[t, u]
                s += dx * dx
                dot += vecs[bi, u] * vecs[t, u]
                na += vecs[bi, u] * vecs[bi, u]
                nb += vecs[t, u] * vecs[t, u]
            base = math.sqrt(s)
            if na == 0.0 or nb == 0.0:
                val = base + 1.0
            else:
                val = base + (1.0 - dot / (math.sqrt(na) * math.sqrt(nb)))
            lo = t if t < bi else bi
            hi = bi if t < bi else t
            dist[lo, hi] = val
            dist[hi, lo] = np.inf
    return labels, pts[:k], vecs[:k], w[:k]


def glance_merge_numba(points, cfavs, k):
    pts = np.ascontiguousarray(points, dtype=np.float64).copy()
    vecs = np.ascontiguousarray(cfavs, dtype=np.float64).copy()
    m = pts.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    labels, c, v, w = _glance_merge_jit(pts, vecs, int(k))
    return labels, c.copy(), v.copy(), w.copy()


# ---------------------------------------------------------------------------
# dispatch

_DISABLED = bool(os.environ.get("DRIFTGCE_NO_NUMBA"))
BACKEND = "numba" if (HAS_NUMBA and not _DISABLED) else "numpy"

if BACKEND == "numba":
    pairwise_dists = pairwise_dists_numba
    kde_log_density = kde_log_density_numba
    glance_merge = glance_merge_numba
else:
    pairwise_dists = pairwise_dists_numpy
    kde_log_density = kde_log_density_numpy
    glance_merge = glance_merge_numpy
