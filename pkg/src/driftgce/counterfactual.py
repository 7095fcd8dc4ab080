"""Per-instance counterfactuals: graph-based search with a gradient fallback.

The primary generator walks a weighted neighborhood graph over the data
window, so every counterfactual endpoint is an actual window member and
the path stays in well-populated regions. Edge weights penalize low
density: for an edge (i, j) of length L the weight is

    L * max(-log kde(midpoint), weight_floor)

with an isotropic Gaussian KDE fitted to the window. A plain kNN graph
over clustered data is usually disconnected, so after building it the
constructor adds the shortest cross-component links (weighted by the
same formula) until one component remains; counterfactual queries would
otherwise fail for every instance whose cluster contains no opposite
prediction.

The fallback is gradient descent on the classic counterfactual loss

    (predict_proba(x + c) - target)^2 + lam * ||c||^2

stopping at the first iterate whose hard prediction flips. It needs no
graph but can stall where the model saturates, which is why it is the
fallback and not the default.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NoCounterfactualError, OptimizationFailureError

_KDE_CHUNK = 4096


def scott_bandwidth(features: np.ndarray) -> float:
    """Scott's rule with one shared bandwidth: n^(-1/(d+4)) * rms feature std."""
    n, d = features.shape
    spread = float(np.sqrt(features.var(axis=0, ddof=1).mean()))
    return max(n ** (-1.0 / (d + 4)) * spread, 1e-3)


def _midpoint_log_density(midpoints, data, bandwidth):
    out = np.empty(len(midpoints))
    for start in range(0, len(midpoints), _KDE_CHUNK):
        block = midpoints[start : start + _KDE_CHUNK]
        out[start : start + _KDE_CHUNK] = kernels.kde_log_density(block, data, bandwidth)
    return out


@dataclass
class FaceGraph:
    """Symmetric weighted graph in CSR form over one data window."""

    features: np.ndarray
    k: int
    bandwidth: float
    weight_floor: float
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    bridges: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.features.shape[0]

    def neighbors(self, i: int):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]


def build_face_graph(
    features: np.ndarray,
    k: int = 10,
    bandwidth: float | None = None,
    weight_floor: float = 1e-6,
) -> FaceGraph:
    """kNN graph (symmetrized) with density-penalized weights, bridged to one component."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InvalidArgumentError("graph needs a 2-d feature array with at least 2 rows")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("features contain non-finite values")
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    n = x.shape[0]
    k_eff = min(k, n - 1)
    if bandwidth is None:
        bandwidth = scott_bandwidth(x)
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be positive")

    dist = kernels.pairwise_dists(x, x)
    # argsort gives deterministic index tie-breaks; column 0 is the point itself
    order = np.argsort(dist, axis=1, kind="stable")
    edges = set()
    for i in range(n):
        for j in order[i, 1 : k_eff + 1]:
            edges.add((min(i, int(j)), max(i, int(j))))
    edge_arr = np.array(sorted(edges), dtype=np.int64)

    def edge_weights(pairs):
        mids = 0.5 * (x[pairs[:, 0]] + x[pairs[:, 1]])
        logp = _midpoint_log_density(mids, x, bandwidth)
        lengths = dist[pairs[:, 0], pairs[:, 1]]
        return lengths * np.maximum(-logp, weight_floor)

    w = edge_weights(edge_arr)

    # union-find over kNN edges, then bridge remaining components with the
    # closest cross pair (weighted by the same density formula)
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edge_arr:
        parent[find(i)] = find(j)

    bridges = []
    while True:
        comp = np.array([find(i) for i in range(n)])
        if len(np.unique(comp)) == 1:
            break
        cross = comp[:, None] != comp[None, :]
        masked = np.where(cross, dist, np.inf)
        i, j = np.unravel_index(int(np.argmin(masked)), masked.shape)
        i, j = min(i, j), max(i, j)
        bridges.append((int(i), int(j)))
        parent[find(i)] = find(j)
    if bridges:
        bridge_arr = np.array(bridges, dtype=np.int64)
        bw = edge_weights(bridge_arr)
        edge_arr = np.vstack([edge_arr, bridge_arr])
        w = np.concatenate([w, bw])

    # CSR over both directions, neighbor lists sorted for reproducibility
    src = np.concatenate([edge_arr[:, 0], edge_arr[:, 1]])
    dst = np.concatenate([edge_arr[:, 1], edge_arr[:, 0]])
    ww = np.concatenate([w, w])
    key = np.lexsort((dst, src))
    src, dst, ww = src[key], dst[key], ww[key]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return FaceGraph(x, k_eff, float(bandwidth), weight_floor, indptr, dst, ww, bridges)


# ---------------------------------------------------------------------------
# graph search


def _multi_source_dijkstra(graph: FaceGraph, sources: np.ndarray):
    """Cost and originating source ("root") for every reachable node.

    Ties settle by heap tuple order (cost, node, root), so results do
    not depend on source iteration order.
    """
    n = len(graph)
    cost = np.full(n, np.inf)
    root = np.full(n, -1, dtype=np.int64)
    best = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, int(s), int(s)) for s in np.sort(sources)]
    heapq.heapify(heap)
    best[sources] = 0.0
    while heap:
        c, u, r = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        cost[u] = c
        root[u] = r
        nbrs, ws = graph.neighbors(u)
        for v, w in zip(nbrs, ws):
            nc = c + w
            if nc < best[v]:
                best[v] = nc
                heapq.heappush(heap, (nc, int(v), r))
    return cost, root


def face_ce(graph: FaceGraph, model, index: int):
    """Shortest density-weighted path from one instance to an opposite prediction.

    Returns (endpoint_index, path, cost); the endpoint is a window row.
    """
    n = len(graph)
    if not 0 <= index < n:
        raise InvalidArgumentError(f"index {index} out of range for window of {n}")
    preds = model.predict(graph.features)
    target = 1 - preds[index]
    cost = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    cost[index] = 0.0
    heap = [(0.0, index)]
    done = np.zeros(n, dtype=bool)
    while heap:
        c, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if preds[u] == target:
            path = [u]
            while path[-1] != index:
                path.append(int(parent[path[-1]]))
            return u, path[::-1], c
        nbrs, ws = graph.neighbors(u)
        for v, w in zip(nbrs, ws):
            nc = c + w
            if nc < cost[v]:
                cost[v] = nc
                parent[v] = u
                heapq.heappush(heap, (nc, int(v)))
    raise NoCounterfactualError(
        f"no reachable instance with predicted class {target} from index {index}"
    )


# ---------------------------------------------------------------------------
# gradient fallback


def wachter_ce(
    model,
    x: np.ndarray,
    lam: float = 0.05,
    learning_rate: float = 0.25,
    max_iter: int = 2000,
) -> np.ndarray:
    """Gradient-descent counterfactual for a single instance.

    Descends (p(x+c) - target)^2 + lam * ||c||^2 from c = 0 and returns
    the first iterate whose hard prediction differs from x's. Raises
    OptimizationFailureError (carrying the last iterate) if the budget
    runs out or the iterate leaves float range.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidArgumentError("wachter_ce expects a single 1-d instance")
    if lam < 0 or learning_rate <= 0 or max_iter < 1:
        raise InvalidArgumentError("lam must be >= 0, learning_rate and max_iter positive")
    source = int(model.predict(x[None])[0])
    target = 1 - source
    c = np.zeros_like(x)
    for _ in range(max_iter):
        point = x + c
        p = float(model.predict_proba(point[None])[0])
        grad = 2.0 * (p - target) * model.input_gradient(point) + 2.0 * lam * c
        c = c - learning_rate * grad
        if not np.all(np.isfinite(c)):
            raise OptimizationFailureError("iterate left float range", last_iterate=point)
        if int(model.predict((x + c)[None])[0]) == target:
            return x + c
    raise OptimizationFailureError(
        f"no class flip within {max_iter} iterations", last_iterate=x + c
    )


# ---------------------------------------------------------------------------
# whole-window generation


@dataclass
class CEResult:
    """One instance's counterfactual and how it was obtained."""

    index: int
    x: np.ndarray
    ce: np.ndarray | None
    method: str  # "face", "wachter" or "failed"
    endpoint_index: int | None = None
    cost: float | None = None
    valid: bool = False

    @property
    def direction(self) -> np.ndarray | None:
        return None if self.ce is None else self.ce - self.x


def batch_counterfactuals(
    features: np.ndarray,
    model,
    graph: FaceGraph | None = None,
    k: int = 10,
    bandwidth: float | None = None,
    weight_floor: float = 1e-6,
    wachter_lam: float = 0.05,
    wachter_lr: float = 0.25,
    wachter_max_iter: int = 2000,
):
    """Counterfactual for every window row; graph first, gradient fallback.

    Returns (results, graph). Instances that defeat both generators are
    recorded with method "failed" rather than raised, so callers can
    keep denominators equal to the window size.
    """
    x = np.asarray(features, dtype=np.float64)
    if graph is None:
        graph = build_face_graph(x, k=k, bandwidth=bandwidth, weight_floor=weight_floor)
    elif graph.features.shape != x.shape or not np.array_equal(graph.features, x):
        raise InvalidArgumentError("graph was built over a different window")
    n = x.shape[0]
    preds = model.predict(x)
    endpoint = np.full(n, -1, dtype=np.int64)
    cost = np.full(n, np.inf)
    for target in (0, 1):
        sources = np.flatnonzero(preds == target)
        if len(sources) == 0:
            continue
        c, r = _multi_source_dijkstra(graph, sources)
        need = preds == 1 - target
        endpoint[need] = r[need]
        cost[need] = c[need]

    results = []
    for i in range(n):
        if endpoint[i] >= 0 and np.isfinite(cost[i]):
            ce = x[endpoint[i]].copy()
            res = CEResult(i, x[i], ce, "face", int(endpoint[i]), float(cost[i]))
        else:
            try:
                ce = wachter_ce(model, x[i], wachter_lam, wachter_lr, wachter_max_iter)
                res = CEResult(i, x[i], ce, "wachter")
            except OptimizationFailureError:
                res = CEResult(i, x[i], None, "failed")
        if res.ce is not None:
            res.valid = int(model.predict(res.ce[None])[0]) == 1 - preds[i]
        results.append(res)
    return results, graph
