"""Drift report: compare two explained windows in three layers.

Layer 1 (data): per-class feature means of each window and their shift,
straight from ground-truth labels. Layer 2 (model): mean absolute
prediction disagreement between the two classifiers over the pooled
evaluation set (both windows stacked). Layer 3 (explanation): groups of
the two windows are matched within each class by an optimal one-to-one
assignment on centroid distance; every matched pair is scored for
centroid shift, action-vector rotation and the disagreement local to
its region; leftovers are reported as disappeared or appeared groups.

Local disagreement partitions the evaluation set into Voronoi cells of
the matched pre-window centroids, so the cell-size-weighted mean of the
local values reconstructs the global value exactly. The headline
decision at the end is a coarse classification (stable, data shift,
real concept drift, combined) driven by explicit thresholds that are
echoed into the report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .classifier import Classifier
from .errors import InvalidArgumentError, ProvenanceError
from .grouping import GceModel, GroupExplanation
from .scenario import SampleWindow

REPORT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ReportParams:
    """Thresholds and evaluation mode for report building."""

    disagreement_mode: str = "probability"
    dmae_threshold: float = 0.05
    inversion_threshold: float = -0.5
    shift_threshold: float = 0.1
    swap_tolerance: float = 0.1

    def __post_init__(self):
        if self.disagreement_mode not in ("probability", "label"):
            raise InvalidArgumentError(
                f"disagreement_mode must be 'probability' or 'label', got {self.disagreement_mode!r}"
            )
        if self.dmae_threshold < 0 or self.shift_threshold < 0 or self.swap_tolerance < 0:
            raise InvalidArgumentError("thresholds must be >= 0")
        if not -1.0 <= self.inversion_threshold <= 1.0:
            raise InvalidArgumentError("inversion_threshold must be a cosine in [-1, 1]")


# ---------------------------------------------------------------------------
# layer 1: data distribution


def per_class_means(features: np.ndarray, labels: np.ndarray) -> dict[int, np.ndarray]:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise InvalidArgumentError(f"bad shapes {x.shape} / {y.shape}")
    out = {}
    for cls in (0, 1):
        sel = y == cls
        if np.any(sel):
            out[cls] = x[sel].mean(axis=0)
    return out


# ---------------------------------------------------------------------------
# layer 2: model disagreement


def _disagreement_values(model_pre, model_post, x_eval, mode: str) -> np.ndarray:
    if mode == "probability":
        return np.abs(model_pre.predict_proba(x_eval) - model_post.predict_proba(x_eval))
    return np.abs(
        model_pre.predict(x_eval).astype(np.float64) - model_post.predict(x_eval)
    )


def global_disagreement(model_pre, model_post, x_eval, mode: str = "probability") -> float:
    """Mean |p_pre - p_post| (or hard-label flip rate) over the evaluation set."""
    x = np.asarray(x_eval, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidArgumentError("x_eval must be a non-empty 2-d array")
    if mode not in ("probability", "label"):
        raise InvalidArgumentError(f"unknown disagreement mode {mode!r}")
    return float(_disagreement_values(model_pre, model_post, x, mode).mean())


def local_disagreement(model_pre, model_post, x_eval, anchors, mode: str = "probability"):
    """Disagreement per Voronoi cell of the anchor points.

    Returns (locals, counts); counts[i] is the number of evaluation
    points nearest to anchors[i], and sum(locals * counts) / sum(counts)
    equals the global disagreement because the cells partition x_eval.
    Cells can be empty; their local value is 0 with count 0.
    """
    x = np.asarray(x_eval, dtype=np.float64)
    a = np.asarray(anchors, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1:
        raise InvalidArgumentError("anchors must be a non-empty 2-d array")
    if a.shape[1] != x.shape[1]:
        raise InvalidArgumentError("anchors and x_eval dimensions differ")
    values = _disagreement_values(model_pre, model_post, x, mode)
    gaps = np.linalg.norm(x[:, None, :] - a[None, :, :], axis=2)
    cell = np.argmin(gaps, axis=1)
    locals_ = np.zeros(a.shape[0])
    counts = np.zeros(a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        sel = cell == i
        counts[i] = int(sel.sum())
        if counts[i]:
            locals_[i] = float(values[sel].mean())
    return locals_, counts


# ---------------------------------------------------------------------------
# layer 3: group matching and change records


@dataclass
class MatchResult:
    """Within-class assignment of pre groups to post groups."""

    matched: list  # (pre_group, post_group, centroid_distance)
    disappeared: list  # pre groups with no counterpart
    appeared: list  # post groups with no counterpart


def match_groups(pre_groups: list[GroupExplanation], post_groups: list[GroupExplanation]) -> MatchResult:
    """Optimal one-to-one centroid matching, restricted to equal class labels.

    Uses the Hungarian assignment per class; with unequal group counts
    the surplus stays unmatched. No distance cutoff is applied: a far
    match plus a large recorded shift is more informative than two
    unexplained disappearances.
    """
    matched, disappeared, appeared = [], [], []
    for cls in (0, 1):
        pre = [g for g in pre_groups if g.class_label == cls]
        post = [g for g in post_groups if g.class_label == cls]
        if not pre or not post:
            disappeared.extend(pre)
            appeared.extend(post)
            continue
        cost = np.array(
            [[float(np.linalg.norm(gp.centroid - gq.centroid)) for gq in post] for gp in pre]
        )
        rows, cols = linear_sum_assignment(cost)
        used_pre, used_post = set(), set()
        for i, j in zip(rows, cols):
            matched.append((pre[i], post[j], float(cost[i, j])))
            used_pre.add(i)
            used_post.add(j)
        disappeared.extend(g for i, g in enumerate(pre) if i not in used_pre)
        appeared.extend(g for j, g in enumerate(post) if j not in used_post)
    return MatchResult(matched, disappeared, appeared)


def cfav_cosine(v_pre: np.ndarray, v_post: np.ndarray) -> float:
    """Cosine between two action vectors; 0 if either has zero norm."""
    na = float(np.linalg.norm(v_pre))
    nb = float(np.linalg.norm(v_post))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(v_pre, v_post)) / (na * nb)


@dataclass
class GroupChange:
    """How one matched group pair moved between windows."""

    pre_key: str
    post_key: str
    class_label: int
    weight_pre: int
    weight_post: int
    centroid_pre: list
    centroid_post: list
    centroid_shift: list
    centroid_shift_magnitude: float
    cfav_pre: list
    cfav_post: list
    cfav_delta: list
    cfav_euclidean: float
    cfav_cosine: float
    cfav_angle_degrees: float | None
    local_dmae: float
    local_count: int
    swap_with: str | None = None

    @property
    def is_swap(self) -> bool:
        return self.swap_with is not None


def _swap_partner(group: GroupExplanation, opposite: list[GroupExplanation], tol: float):
    """Key of an opposite-class group sitting on top of this one, if any."""
    best_key, best_gap = None, tol
    for g in opposite:
        gap = float(np.linalg.norm(group.centroid - g.centroid))
        if gap <= best_gap:
            best_key, best_gap = g.key, gap
    return best_key


def group_changes(
    match: MatchResult,
    model_pre,
    model_post,
    x_eval: np.ndarray,
    gce_pre: GceModel,
    gce_post: GceModel,
    params: ReportParams,
) -> list[GroupChange]:
    """Score every matched pair; anchors for locals are the pre centroids."""
    if not match.matched:
        return []
    anchors = np.stack([gp.centroid for gp, _, _ in match.matched])
    locals_, counts = local_disagreement(
        model_pre, model_post, x_eval, anchors, params.disagreement_mode
    )
    changes = []
    for idx, (gp, gq, gap) in enumerate(match.matched):
        shift = gq.centroid - gp.centroid
        cos = cfav_cosine(gp.cfav, gq.cfav)
        has_dir = np.linalg.norm(gp.cfav) > 0 and np.linalg.norm(gq.cfav) > 0
        angle = float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))) if has_dir else None
        swap_with = None
        if gap > params.shift_threshold:
            # a large jump onto an opposite-class group is a label swap,
            # not a movement of the underlying population
            swap_with = _swap_partner(
                gp, gce_post.groups_for_class(1 - gp.class_label), params.swap_tolerance
            )
        changes.append(
            GroupChange(
                pre_key=gp.key,
                post_key=gq.key,
                class_label=gp.class_label,
                weight_pre=gp.weight,
                weight_post=gq.weight,
                centroid_pre=gp.centroid.tolist(),
                centroid_post=gq.centroid.tolist(),
                centroid_shift=shift.tolist(),
                centroid_shift_magnitude=float(np.linalg.norm(shift)),
                cfav_pre=gp.cfav.tolist(),
                cfav_post=gq.cfav.tolist(),
                cfav_delta=(gq.cfav - gp.cfav).tolist(),
                cfav_euclidean=float(np.linalg.norm(gq.cfav - gp.cfav)),
                cfav_cosine=cos,
                cfav_angle_degrees=angle,
                local_dmae=float(locals_[idx]),
                local_count=int(counts[idx]),
                swap_with=swap_with,
            )
        )
    return changes


# ---------------------------------------------------------------------------
# headline


@dataclass
class Headline:
    decision: str
    model_changed: bool
    data_changed: bool
    inversion: bool
    swap: bool
    global_dmae: float
    reasons: list[str] = field(default_factory=list)


def classify_headline(
    global_dmae: float,
    changes: list[GroupChange],
    disappeared_swaps: list[str | None],
    appeared_swaps: list[str | None],
    params: ReportParams,
) -> Headline:
    """Coarse drift verdict from the three layers.

    A swap annotation marks group movement as label flips rather than
    population movement, so swapped pairs do not count as data change.
    """
    reasons = []
    model_changed = global_dmae >= params.dmae_threshold
    if model_changed:
        reasons.append(
            f"models disagree: global dmae {global_dmae:.4f} >= {params.dmae_threshold}"
        )

    inversion = any(c.cfav_cosine < params.inversion_threshold for c in changes)
    if inversion:
        worst = min(c.cfav_cosine for c in changes)
        reasons.append(f"counterfactual direction inverted (worst cosine {worst:.3f})")

    swap = (
        any(c.is_swap for c in changes)
        or any(s is not None for s in disappeared_swaps)
        or any(s is not None for s in appeared_swaps)
    )
    if swap:
        reasons.append("group(s) coincide with an opposite-class group of the other window")

    n_gone = len(disappeared_swaps)
    n_new = len(appeared_swaps)
    moved = [
        c
        for c in changes
        if not c.is_swap and c.centroid_shift_magnitude > params.shift_threshold
    ]
    data_changed = n_gone + n_new > 0 or bool(moved)
    if n_gone or n_new:
        reasons.append(f"{n_gone} group(s) disappeared, {n_new} appeared")
    for c in moved:
        reasons.append(
            f"{c.pre_key} moved {c.centroid_shift_magnitude:.3f} (> {params.shift_threshold})"
        )

    if not model_changed and not data_changed and not inversion:
        decision = "stable"
    elif not model_changed:
        decision = "data shift"
    elif (swap or inversion) and not data_changed:
        decision = "real concept drift"
    else:
        decision = "combined"
    return Headline(decision, model_changed, data_changed, inversion, swap, global_dmae, reasons)


# ---------------------------------------------------------------------------
# report assembly


def _group_dict(g: GroupExplanation) -> dict:
    return {
        "key": g.key,
        "class_label": g.class_label,
        "pair_index": g.pair_index,
        "centroid": g.centroid.tolist(),
        "cfav": g.cfav.tolist(),
        "weight": g.weight,
        "proximity": g.proximity,
    }


def _check_provenance(window: SampleWindow, model: Classifier, gce: GceModel, tag: str):
    if gce.model.model_hash != model.model_hash:
        raise ProvenanceError(f"{tag}: explanation was built for a different model")
    if gce.n_window != len(window):
        raise ProvenanceError(
            f"{tag}: explanation covers {gce.n_window} rows, window has {len(window)}"
        )
    if gce.window_tag and window.tag and gce.window_tag != window.tag:
        raise ProvenanceError(
            f"{tag}: window tag {window.tag!r} does not match explanation tag {gce.window_tag!r}"
        )


def build_report(
    pre_window: SampleWindow,
    post_window: SampleWindow,
    model_pre: Classifier,
    model_post: Classifier,
    gce_pre: GceModel,
    gce_post: GceModel,
    params: ReportParams | None = None,
) -> dict:
    """Assemble the full three-layer drift report as a JSON-ready dict."""
    params = params or ReportParams()
    if pre_window.dim != post_window.dim:
        raise InvalidArgumentError("windows have different feature dimensions")
    _check_provenance(pre_window, model_pre, gce_pre, "pre")
    _check_provenance(post_window, model_post, gce_post, "post")

    x_eval = np.vstack([pre_window.features, post_window.features])
    gdmae = global_disagreement(model_pre, model_post, x_eval, params.disagreement_mode)

    match = match_groups(gce_pre.groups, gce_post.groups)
    changes = group_changes(match, model_pre, model_post, x_eval, gce_pre, gce_post, params)
    disappeared_swaps = [
        _swap_partner(g, gce_post.groups_for_class(1 - g.class_label), params.swap_tolerance)
        for g in match.disappeared
    ]
    appeared_swaps = [
        _swap_partner(g, gce_pre.groups_for_class(1 - g.class_label), params.swap_tolerance)
        for g in match.appeared
    ]
    headline = classify_headline(gdmae, changes, disappeared_swaps, appeared_swaps, params)

    means_pre = per_class_means(pre_window.features, pre_window.labels)
    means_post = per_class_means(post_window.features, post_window.labels)
    mean_shift = {
        cls: (means_post[cls] - means_pre[cls]).tolist()
        for cls in means_pre
        if cls in means_post
    }

    return {
        "format_version": REPORT_FORMAT_VERSION,
        "params": asdict(params),
        "data_layer": {
            "class_counts_pre": {
                str(c): int(np.sum(pre_window.labels == c)) for c in (0, 1)
            },
            "class_counts_post": {
                str(c): int(np.sum(post_window.labels == c)) for c in (0, 1)
            },
            "class_means_pre": {str(c): m.tolist() for c, m in means_pre.items()},
            "class_means_post": {str(c): m.tolist() for c, m in means_post.items()},
            "class_mean_shift": {str(c): v for c, v in mean_shift.items()},
        },
        "model_layer": {
            "global_dmae": gdmae,
            "disagreement_mode": params.disagreement_mode,
            "model_hash_pre": model_pre.model_hash,
            "model_hash_post": model_post.model_hash,
        },
        "explanation_layer": {
            "groups_pre": [_group_dict(g) for g in gce_pre.groups],
            "groups_post": [_group_dict(g) for g in gce_post.groups],
            "matched": [asdict(c) for c in changes],
            "disappeared": [
                {**_group_dict(g), "swap_with": s}
                for g, s in zip(match.disappeared, disappeared_swaps)
            ],
            "appeared": [
                {**_group_dict(g), "swap_with": s}
                for g, s in zip(match.appeared, appeared_swaps)
            ],
        },
        "headline": asdict(headline),
        "provenance": {
            "n_pre": len(pre_window),
            "n_post": len(post_window),
            "window_tag_pre": pre_window.tag,
            "window_tag_post": post_window.tag,
            "gce_params_pre": gce_pre.params,
            "gce_params_post": gce_post.params,
            "method_counts_pre": gce_pre.method_counts,
            "method_counts_post": gce_post.method_counts,
            "k_per_class_pre": {str(k): v for k, v in gce_pre.k_per_class.items()},
            "k_per_class_post": {str(k): v for k, v in gce_post.k_per_class.items()},
        },
    }


def save_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    version = report.get("format_version")
    if version != REPORT_FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported report format_version {version!r}")
    return report
