"""Property-based invariants over randomized inputs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from driftgce.analysis import (
    cfav_cosine,
    global_disagreement,
    local_disagreement,
    match_groups,
)
from driftgce.classifier import Classifier, TrainConfig, _sigmoid
from driftgce.grouping import GroupExplanation, combined_distance
from driftgce.kernels import glance_merge_numpy
from driftgce.scenario import SampleWindow, read_window_csv, write_window_csv

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, width=64)
unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, width=64)


def points_strategy(n_min=1, n_max=20, d=2, elements=unit):
    return st.integers(n_min, n_max).flatmap(
        lambda n: arrays(np.float64, (n, d), elements=elements)
    )


def model_from(w, b):
    cfg = TrainConfig(architecture="logistic")
    return Classifier("logistic", {"w": np.asarray(w), "b": np.array([b])}, cfg)


# ---------------------------------------------------------------------------
# disagreement


@settings(max_examples=60, deadline=None)
@given(
    w1=arrays(np.float64, 2, elements=finite),
    b1=finite,
    w2=arrays(np.float64, 2, elements=finite),
    b2=finite,
    x=points_strategy(),
    mode=st.sampled_from(["probability", "label"]),
)
def test_disagreement_is_bounded_unit_interval(w1, b1, w2, b2, x, mode):
    val = global_disagreement(model_from(w1, b1), model_from(w2, b2), x, mode)
    assert 0.0 <= val <= 1.0


@settings(max_examples=60, deadline=None)
@given(
    w1=arrays(np.float64, 2, elements=finite),
    b1=finite,
    w2=arrays(np.float64, 2, elements=finite),
    b2=finite,
    x=points_strategy(n_min=2),
    anchors=points_strategy(n_min=1, n_max=6),
)
def test_local_cells_reconstruct_global(w1, b1, w2, b2, x, anchors):
    m1, m2 = model_from(w1, b1), model_from(w2, b2)
    locals_, counts = local_disagreement(m1, m2, x, anchors)
    assert counts.sum() == len(x)
    weighted = float(np.sum(locals_ * counts) / counts.sum())
    assert weighted == pytest.approx(global_disagreement(m1, m2, x), abs=1e-9)


# ---------------------------------------------------------------------------
# distances and cosines


@settings(max_examples=100, deadline=None)
@given(
    xa=arrays(np.float64, 3, elements=finite),
    xb=arrays(np.float64, 3, elements=finite),
    va=arrays(np.float64, 3, elements=finite),
    vb=arrays(np.float64, 3, elements=finite),
)
def test_combined_distance_bounds_and_symmetry(xa, xb, va, vb):
    d_ab = combined_distance(xa, xb, va, vb)
    d_ba = combined_distance(xb, xa, vb, va)
    assert d_ab == pytest.approx(d_ba, abs=1e-9)
    assert d_ab >= 0.0
    assert d_ab <= float(np.linalg.norm(xa - xb)) + 2.0 + 1e-9


@settings(max_examples=100, deadline=None)
@given(
    va=arrays(np.float64, 3, elements=finite),
    vb=arrays(np.float64, 3, elements=finite),
)
def test_cfav_cosine_stays_in_range(va, vb):
    assert -1.0 - 1e-12 <= cfav_cosine(va, vb) <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# merge loop


@settings(max_examples=40, deadline=None)
@given(data=st.data(), n=st.integers(2, 12))
def test_merge_conserves_weight_every_step(data, n):
    pts = data.draw(arrays(np.float64, (n, 2), elements=unit))
    dirs = data.draw(arrays(np.float64, (n, 2), elements=finite))
    k = data.draw(st.integers(1, n))
    trace = []
    labels, _, _, weights = glance_merge_numpy(pts, dirs, k, trace=trace)
    for step in trace:
        assert step["total_weight"] == pytest.approx(float(n), abs=1e-9)
    assert weights.sum() == pytest.approx(float(n), abs=1e-9)
    assert set(labels.tolist()) == set(range(k))
    counts = np.bincount(labels, minlength=k)
    np.testing.assert_array_equal(counts, weights.astype(np.int64))


# ---------------------------------------------------------------------------
# matching


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_matching_partitions_both_group_lists(data):
    def mk_groups(count, label):
        cents = data.draw(arrays(np.float64, (count, 2), elements=unit)) if count else []
        return [
            GroupExplanation(
                key=f"Class {label}, Pair {i + 1}",
                class_label=label,
                pair_index=i + 1,
                centroid=np.asarray(cents[i]),
                cfav=np.zeros(2),
                weight=1,
                member_indices=np.array([i]),
            )
            for i in range(count)
        ]

    pre, post = [], []
    for label in (0, 1):
        pre += mk_groups(data.draw(st.integers(0, 4)), label)
        post += mk_groups(data.draw(st.integers(0, 4)), label)
    res = match_groups(pre, post)
    matched_pre = [id(g) for g, _, _ in res.matched] + [id(g) for g in res.disappeared]
    matched_post = [id(g) for _, g, _ in res.matched] + [id(g) for g in res.appeared]
    assert sorted(matched_pre) == sorted(id(g) for g in pre)
    assert sorted(matched_post) == sorted(id(g) for g in post)
    for gp, gq, gap in res.matched:
        assert gp.class_label == gq.class_label
        assert gap == pytest.approx(float(np.linalg.norm(gp.centroid - gq.centroid)), abs=1e-9)


# ---------------------------------------------------------------------------
# numerics and files


@settings(max_examples=100, deadline=None)
@given(z=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_sigmoid_is_bounded_and_monotone(z):
    p = _sigmoid(np.array([z, z + 1.0]))
    assert 0.0 <= p[0] <= 1.0
    assert p[0] <= p[1]


@settings(max_examples=25, deadline=None)
@given(data=st.data(), n=st.integers(1, 15))
def test_window_csv_roundtrip_property(tmp_path_factory, data, n):
    feats = data.draw(arrays(np.float64, (n, 2), elements=unit))
    labels = data.draw(arrays(np.int64, n, elements=st.integers(0, 1)))
    window = SampleWindow(feats, labels)
    path = tmp_path_factory.mktemp("csv") / "w.csv"
    write_window_csv(window, path)
    back = read_window_csv(path)
    np.testing.assert_array_equal(back.features, feats)
    np.testing.assert_array_equal(back.labels, labels)
