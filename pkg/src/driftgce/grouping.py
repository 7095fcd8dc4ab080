"""Group counterfactual explanations for one data window.

Per predicted class, every instance's counterfactual direction is
reduced to a handful of groups: the number of groups comes from an
x-means estimate over the class's feature vectors, and the grouping
itself is a greedy agglomerative merge (kernels.glance_merge) over
instance positions and counterfactual directions. Each group carries a
centroid (mean member position) and a counterfactual action vector,
CFAV (mean member direction); applying a group's CFAV to its members
is the group-level recourse whose validity is re-checked against the
model.

A GceModel keeps a reference to the classifier it explains. That
binding is what lets assign_cfav route an arbitrary point to a group of
the point's own predicted class. Serialized dumps store the model hash
instead of the model; loading requires the matching classifier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .classifier import Classifier
from .counterfactual import CEResult, batch_counterfactuals
from .errors import InvalidArgumentError, NoCounterfactualError, ProvenanceError

GCE_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# number-of-groups estimation (x-means with a spherical BIC)


def bic_score(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    """BIC of a fitted hard clustering under a shared spherical variance.

    Free parameter count is K*(d+1): K*d for the means, K-1 mixing
    weights and one variance.
    """
    n, d = points.shape
    k = centers.shape[0]
    rss = float(np.sum((points - centers[labels]) ** 2))
    sigma2 = max(rss / (n * d), 1e-12)
    counts = np.bincount(labels, minlength=k)
    occupied = counts > 0
    loglik = float(np.sum(counts[occupied] * np.log(counts[occupied] / n)))
    loglik -= 0.5 * n * d * (np.log(2.0 * np.pi * sigma2) + 1.0)
    return loglik - 0.5 * k * (d + 1) * np.log(n)


def _kmeans(points: np.ndarray, k: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Seeded k-means++ followed by Lloyd iterations. Returns (centers, labels)."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    closest = kernels.pairwise_dists(points, centers[:1])[:, 0] ** 2
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[j] = points[int(rng.integers(n))]
            continue
        centers[j] = points[int(rng.choice(n, p=closest / total))]
        closest = np.minimum(closest, ((points - centers[j]) ** 2).sum(axis=1))

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(100):
        dist = kernels.pairwise_dists(points, centers)
        new_labels = np.argmin(dist, axis=1)
        for j in range(k):
            sel = new_labels == j
            if np.any(sel):
                centers[j] = points[sel].mean(axis=0)
            else:
                # revive an empty cluster at the worst-fit point
                centers[j] = points[int(np.argmax(dist[np.arange(n), new_labels]))]
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels


def estimate_k(points: np.ndarray, k_max: int = 6, seed: int = 0) -> int:
    """x-means estimate of the cluster count in a point set.

    Starts from one cluster and recursively accepts a 2-means split of
    a leaf whenever the split improves the leaf's BIC, stopping at
    k_max leaves. Identical points collapse to one cluster.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidArgumentError("estimate_k expects a non-empty 2-d array")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("points contain non-finite values")
    if k_max < 1:
        raise InvalidArgumentError("k_max must be >= 1")
    n = x.shape[0]
    if n == 1 or np.all(x == x[0]):
        return 1

    pending = [np.arange(n)]
    done = 0
    split_no = 0
    while pending:
        idx = pending.pop(0)
        pts = x[idx]
        room = done + len(pending) + 1 < k_max
        if not room or len(idx) < 2 or np.all(pts == pts[0]):
            done += 1
            continue
        split_no += 1
        centers, labels = _kmeans(pts, 2, np.random.default_rng([seed, split_no]))
        if len(np.unique(labels)) < 2:
            done += 1
            continue
        parent = bic_score(pts, np.zeros(len(idx), dtype=np.int64), pts.mean(axis=0)[None, :])
        if bic_score(pts, labels, centers) > parent:
            pending.append(idx[labels == 0])
            pending.append(idx[labels == 1])
        else:
            done += 1
    return done


# ---------------------------------------------------------------------------
# grouping


def combined_distance(x_a, x_b, v_a, v_b) -> float:
    """Merge distance: Euclidean position gap plus cosine gap of directions.

    The cosine term is neutral (exactly 1) when either direction has
    zero norm, so positionless agreement cannot be claimed for an empty
    action.
    """
    xa = np.asarray(x_a, dtype=np.float64)
    xb = np.asarray(x_b, dtype=np.float64)
    va = np.asarray(v_a, dtype=np.float64)
    vb = np.asarray(v_b, dtype=np.float64)
    if not (xa.shape == xb.shape and va.shape == vb.shape and xa.ndim == 1):
        raise InvalidArgumentError("combined_distance expects four 1-d vectors")
    return kernels._combined_entry(xa, xb, va, vb)


def glance(points: np.ndarray, directions: np.ndarray, k: int):
    """Merge instances down to k groups; see kernels.glance_merge for the contract.

    Returns (labels, centroids, cfavs, weights) where labels maps each
    input row to a group slot in 0..k-1.
    """
    pts = np.asarray(points, dtype=np.float64)
    dirs = np.asarray(directions, dtype=np.float64)
    if pts.shape != dirs.shape or pts.ndim != 2:
        raise InvalidArgumentError("points and directions must be equal-shape 2-d arrays")
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(dirs))):
        raise InvalidArgumentError("points or directions contain non-finite values")
    if not 1 <= k <= pts.shape[0]:
        raise InvalidArgumentError(f"k must be in [1, {pts.shape[0]}], got {k}")
    return kernels.glance_merge(pts, dirs, int(k))


@dataclass
class GroupExplanation:
    """One group's centroid, action vector and membership."""

    key: str
    class_label: int
    pair_index: int
    centroid: np.ndarray
    cfav: np.ndarray
    weight: int
    member_indices: np.ndarray

    @property
    def proximity(self) -> float:
        """Length of the group action: the cost every member is charged."""
        return float(np.linalg.norm(self.cfav))


@dataclass
class GceModel:
    """Per-window group counterfactual explanation bound to its classifier."""

    groups: list[GroupExplanation]
    model: Classifier
    window_tag: str
    n_window: int
    k_per_class: dict[int, int]
    method_counts: dict[str, int]
    params: dict = field(default_factory=dict)

    def groups_for_class(self, class_label: int) -> list[GroupExplanation]:
        return [g for g in self.groups if g.class_label == class_label]

    def mean_cost(self) -> float:
        """Average action length per window instance (failed CEs count as members)."""
        total = sum(g.weight * g.proximity for g in self.groups)
        return total / self.n_window

    def assign_cfav(self, x) -> tuple[GroupExplanation, np.ndarray]:
        """Route a point to the nearest group of its own predicted class."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise InvalidArgumentError("assign_cfav expects a single 1-d point")
        y = int(self.model.predict(x[None])[0])
        candidates = self.groups_for_class(y)
        if not candidates:
            raise NoCounterfactualError(f"no groups exist for predicted class {y}")
        gaps = [float(np.linalg.norm(x - g.centroid)) for g in candidates]
        best = candidates[int(np.argmin(gaps))]
        return best, best.cfav


def assign_cfav(gce: GceModel, x) -> tuple[GroupExplanation, np.ndarray]:
    return gce.assign_cfav(x)


def explain_window(
    features: np.ndarray,
    model: Classifier,
    window_tag: str = "",
    k_neighbors: int = 10,
    bandwidth: float | None = None,
    k_max: int = 6,
    seed: int = 0,
    ce_results: list[CEResult] | None = None,
) -> GceModel:
    """Build the group explanation of one window under one model.

    Group count per predicted class is estimated from all points of
    that class; only instances with a valid counterfactual join the
    merge (k is capped by their number). Group pair indices sort by
    descending weight within a class, heaviest first.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidArgumentError("explain_window expects a non-empty 2-d feature array")
    if ce_results is None:
        ce_results, _ = batch_counterfactuals(x, model, k=k_neighbors, bandwidth=bandwidth)
    elif len(ce_results) != x.shape[0]:
        raise InvalidArgumentError("ce_results length does not match the window")

    preds = model.predict(x)
    method_counts = {"face": 0, "wachter": 0, "failed": 0, "valid": 0}
    for r in ce_results:
        method_counts[r.method] += 1
        method_counts["valid"] += int(r.valid)

    groups: list[GroupExplanation] = []
    k_per_class: dict[int, int] = {}
    for y in (0, 1):
        class_rows = np.flatnonzero(preds == y)
        if len(class_rows) == 0:
            k_per_class[y] = 0
            continue
        k_est = estimate_k(x[class_rows], k_max=k_max, seed=seed)
        valid_rows = np.array(
            [i for i in class_rows if ce_results[i].valid], dtype=np.int64
        )
        if len(valid_rows) == 0:
            k_per_class[y] = 0
            continue
        k_use = min(k_est, len(valid_rows))
        k_per_class[y] = k_use
        dirs = np.stack([ce_results[i].ce - ce_results[i].x for i in valid_rows])
        labels, centroids, cfavs, weights = glance(x[valid_rows], dirs, k_use)
        order = np.argsort(-weights, kind="stable")
        for pair_index, slot in enumerate(order, start=1):
            members = valid_rows[labels == slot]
            groups.append(
                GroupExplanation(
                    key=f"Class {y}, Pair {pair_index}",
                    class_label=y,
                    pair_index=pair_index,
                    centroid=centroids[slot].copy(),
                    cfav=cfavs[slot].copy(),
                    weight=int(weights[slot]),
                    member_indices=members,
                )
            )
    params = {
        "k_neighbors": k_neighbors,
        "bandwidth": bandwidth,
        "k_max": k_max,
        "seed": seed,
    }
    return GceModel(groups, model, window_tag, x.shape[0], k_per_class, method_counts, params)


# ---------------------------------------------------------------------------
# serialization (the model itself stays external; only its hash is stored)


def gce_to_dict(gce: GceModel) -> dict:
    return {
        "format_version": GCE_FORMAT_VERSION,
        "window_tag": gce.window_tag,
        "n_window": gce.n_window,
        "model_hash": gce.model.model_hash,
        "k_per_class": {str(k): v for k, v in gce.k_per_class.items()},
        "method_counts": gce.method_counts,
        "params": gce.params,
        "groups": [
            {
                "key": g.key,
                "class_label": g.class_label,
                "pair_index": g.pair_index,
                "centroid": g.centroid.tolist(),
                "cfav": g.cfav.tolist(),
                "weight": g.weight,
                "member_indices": g.member_indices.tolist(),
            }
            for g in gce.groups
        ],
    }


def save_gce(gce: GceModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(gce_to_dict(gce), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_gce(path, model: Classifier) -> GceModel:
    """Rehydrate a dumped explanation, re-binding it to its classifier.

    The stored model hash must match; explaining one model and routing
    points with another would silently produce nonsense otherwise.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != GCE_FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported gce format_version {version!r}")
    if doc["model_hash"] != model.model_hash:
        raise ProvenanceError(
            "model hash mismatch: this explanation was built for a different classifier"
        )
    groups = [
        GroupExplanation(
            key=g["key"],
            class_label=int(g["class_label"]),
            pair_index=int(g["pair_index"]),
            centroid=np.asarray(g["centroid"], dtype=np.float64),
            cfav=np.asarray(g["cfav"], dtype=np.float64),
            weight=int(g["weight"]),
            member_indices=np.asarray(g["member_indices"], dtype=np.int64),
        )
        for g in doc["groups"]
    ]
    return GceModel(
        groups=groups,
        model=model,
        window_tag=doc["window_tag"],
        n_window=int(doc["n_window"]),
        k_per_class={int(k): v for k, v in doc["k_per_class"].items()},
        method_counts=doc["method_counts"],
        params=doc.get("params", {}),
    )
