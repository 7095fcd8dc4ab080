"""Independent reference implementations used to pin expected values.

Each oracle restates a computation in the simplest form that could
possibly be right, sharing no code with the library. Tests compare
library output against these, so a bug would have to appear twice, in
two different shapes, to slip through.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph


def finite_diff_gradient(model, x, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of model.predict_proba at x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[i] += eps
        dn[i] -= eps
        grad[i] = (model.predict_proba(up)[0] - model.predict_proba(dn)[0]) / (2 * eps)
    return grad


def combined_entry(xa, xb, va, vb) -> float:
    dx = np.asarray(xa, dtype=np.float64) - np.asarray(xb, dtype=np.float64)
    dist = math.sqrt(float(np.dot(dx, dx)))
    na = math.sqrt(float(np.dot(va, va)))
    nb = math.sqrt(float(np.dot(vb, vb)))
    if na == 0.0 or nb == 0.0:
        return dist + 1.0
    return dist + (1.0 - float(np.dot(va, vb)) / (na * nb))


def glance_oracle(points, directions, k: int):
    """Greedy agglomerative merge restated with plain python lists.

    Contract shared with the library kernel: clusters start as
    singletons in input order; each step scans the upper triangle in
    row-major order and merges the first strictly-smallest pair; the
    merged cluster keeps the earlier slot and the later slot is deleted;
    centroid and direction merge as weight-proportional means. Unlike
    the kernel this recomputes every pairwise entry from scratch each
    step, so agreement is not an artifact of shared caching logic.
    """
    pts = [np.asarray(p, dtype=np.float64).copy() for p in points]
    vecs = [np.asarray(v, dtype=np.float64).copy() for v in directions]
    weights = [1.0 for _ in pts]
    members = [[i] for i in range(len(pts))]
    if not 1 <= k <= len(pts):
        raise ValueError("k out of range")

    while len(pts) > k:
        best, bi, bj = math.inf, 0, 1
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = combined_entry(pts[i], pts[j], vecs[i], vecs[j])
                if d < best:
                    best, bi, bj = d, i, j
        wi, wj = weights[bi], weights[bj]
        tot = wi + wj
        pts[bi] = (wi * pts[bi] + wj * pts[bj]) / tot
        vecs[bi] = (wi * vecs[bi] + wj * vecs[bj]) / tot
        weights[bi] = tot
        members[bi] = members[bi] + members[bj]
        del pts[bj], vecs[bj], weights[bj], members[bj]

    labels = np.empty(sum(len(m) for m in members), dtype=np.int64)
    for slot, mem in enumerate(members):
        for p in mem:
            labels[p] = slot
    return (
        labels,
        np.array(pts, dtype=np.float64),
        np.array(vecs, dtype=np.float64),
        np.array(weights, dtype=np.float64),
    )


def matching_cost_oracle(pre_centroids, post_centroids) -> float:
    """Minimum total distance of a one-to-one matching, by enumeration.

    The smaller side is fully matched; with ties several matchings can
    reach the optimum, so only the optimal cost is pinned.
    """
    pre = [np.asarray(c, dtype=np.float64) for c in pre_centroids]
    post = [np.asarray(c, dtype=np.float64) for c in post_centroids]
    if not pre or not post:
        return 0.0
    if len(pre) > len(post):
        pre, post = post, pre
    best = math.inf
    for perm in itertools.permutations(range(len(post)), len(pre)):
        total = sum(float(np.linalg.norm(pre[i] - post[j])) for i, j in enumerate(perm))
        best = min(best, total)
    return best


def kde_log_density_oracle(queries, data, bandwidth: float) -> np.ndarray:
    """Direct (non-logsumexp) isotropic Gaussian KDE log-density."""
    data = np.asarray(data, dtype=np.float64)
    n, d = data.shape
    out = []
    for q in np.asarray(queries, dtype=np.float64):
        sq = ((data - q) ** 2).sum(axis=1)
        dens = np.exp(-sq / (2.0 * bandwidth * bandwidth)).sum()
        dens /= n * bandwidth**d * (2.0 * math.pi) ** (d / 2.0)
        out.append(math.log(dens))
    return np.array(out)


def shortest_path_costs_oracle(graph, sources) -> np.ndarray:
    """Min cost from any source to every node, via scipy's dijkstra."""
    n = len(graph.indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(graph.indptr))
    mat = scipy.sparse.csr_matrix((graph.weights, (rows, graph.indices)), shape=(n, n))
    dist = scipy.sparse.csgraph.dijkstra(mat, directed=False, indices=list(sources))
    return dist.min(axis=0)


def bic_oracle(points, labels, centers) -> float:
    """Spherical shared-variance BIC, restated term by term."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    centers = np.asarray(centers, dtype=np.float64)
    n, d = points.shape
    k = centers.shape[0]
    rss = 0.0
    for i in range(n):
        rss += float(np.sum((points[i] - centers[labels[i]]) ** 2))
    sigma2 = max(rss / (n * d), 1e-12)
    loglik = 0.0
    for j in range(k):
        nj = int(np.sum(labels == j))
        if nj > 0:
            loglik += nj * math.log(nj / n)
    loglik -= 0.5 * n * d * (math.log(2.0 * math.pi * sigma2) + 1.0)
    return loglik - 0.5 * k * (d + 1) * math.log(n)


def mean_abs_prob_gap_oracle(model_a, model_b, points) -> float:
    """Global disagreement in probability mode, one point at a time."""
    total = 0.0
    for x in points:
        total += abs(model_a.predict_proba(x)[0] - model_b.predict_proba(x)[0])
    return float(total) / len(points)
