"""Kernel correctness, backend parity, and dispatch."""

import json
import subprocess
import sys

import numpy as np
import pytest

from driftgce import kernels
from oracles import combined_entry, glance_oracle, kde_log_density_oracle

BACKENDS_MERGE = [kernels.glance_merge_numpy]
BACKENDS_PAIRWISE = [kernels.pairwise_dists_numpy]
BACKENDS_KDE = [kernels.kde_log_density_numpy]
if kernels.HAS_NUMBA:
    BACKENDS_MERGE.append(kernels.glance_merge_numba)
    BACKENDS_PAIRWISE.append(kernels.pairwise_dists_numba)
    BACKENDS_KDE.append(kernels.kde_log_density_numba)


# ---------------------------------------------------------------------------
# pairwise distances


@pytest.mark.parametrize("fn", BACKENDS_PAIRWISE)
def test_pairwise_matches_norm_loop(fn):
    rng = np.random.default_rng(0)
    a, b = rng.random((7, 3)), rng.random((5, 3))
    out = fn(a, b)
    for i in range(7):
        for j in range(5):
            assert out[i, j] == pytest.approx(np.linalg.norm(a[i] - b[j]), abs=1e-12)


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed")
def test_pairwise_backend_parity():
    rng = np.random.default_rng(1)
    a, b = rng.random((40, 4)), rng.random((30, 4))
    np.testing.assert_allclose(
        kernels.pairwise_dists_numpy(a, b), kernels.pairwise_dists_numba(a, b), atol=1e-12
    )


# ---------------------------------------------------------------------------
# KDE log-density


@pytest.mark.parametrize("fn", BACKENDS_KDE)
def test_kde_matches_direct_oracle(fn):
    rng = np.random.default_rng(2)
    data = rng.random((150, 3))
    queries = rng.random((30, 3))
    np.testing.assert_allclose(
        fn(queries, data, 0.15), kde_log_density_oracle(queries, data, 0.15), atol=1e-10
    )


@pytest.mark.parametrize("fn", BACKENDS_KDE)
def test_kde_survives_far_query(fn):
    # naive exp-sum underflows to log(0) here; the shifted sum must not
    data = np.random.default_rng(3).random((50, 2))
    far = np.array([[80.0, -80.0]])
    val = fn(far, data, 0.05)
    assert np.isfinite(val[0]) and val[0] < -1e5


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed")
def test_kde_backend_parity():
    rng = np.random.default_rng(4)
    data = rng.random((200, 2))
    queries = rng.random((60, 2))
    np.testing.assert_allclose(
        kernels.kde_log_density_numpy(queries, data, 0.1),
        kernels.kde_log_density_numba(queries, data, 0.1),
        atol=1e-12,
    )


# ---------------------------------------------------------------------------
# merge loop


@pytest.mark.parametrize("fn", BACKENDS_MERGE)
def test_merge_matches_bruteforce_oracle(fn):
    rng = np.random.default_rng(5)
    for trial in range(40):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        k = int(rng.integers(1, n + 1))
        pts = rng.random((n, d))
        dirs = rng.standard_normal((n, d))
        if trial % 5 == 0:
            dirs[int(rng.integers(n))] = 0.0
        labels, cents, vecs, weights = fn(pts, dirs, k)
        ref_labels, ref_cents, ref_vecs, ref_weights = glance_oracle(pts, dirs, k)
        np.testing.assert_array_equal(labels, ref_labels)
        np.testing.assert_allclose(cents, ref_cents, atol=1e-9)
        np.testing.assert_allclose(vecs, ref_vecs, atol=1e-9)
        np.testing.assert_allclose(weights, ref_weights, atol=1e-9)


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed")
def test_merge_backend_parity_exact():
    rng = np.random.default_rng(6)
    for _ in range(25):
        n = int(rng.integers(2, 40))
        k = int(rng.integers(1, n + 1))
        pts = rng.random((n, 3))
        dirs = rng.standard_normal((n, 3))
        la, ca, va, wa = kernels.glance_merge_numpy(pts, dirs, k)
        lb, cb, vb, wb = kernels.glance_merge_numba(pts, dirs, k)
        np.testing.assert_array_equal(la, lb)
        assert np.array_equal(ca, cb) and np.array_equal(va, vb) and np.array_equal(wa, wb)


def test_merge_tie_breaks_to_first_pair():
    # all pairwise entries are equal, so the scan order decides: (0, 1)
    pts = np.zeros((3, 2))
    dirs = np.ones((3, 2))
    labels, _, _, weights = kernels.glance_merge_numpy(pts, dirs, 2)
    np.testing.assert_array_equal(labels, [0, 0, 1])
    np.testing.assert_array_equal(weights, [2.0, 1.0])


def test_merge_zero_direction_gets_neutral_cosine():
    xa, xb = np.array([0.0, 0.0]), np.array([0.3, 0.4])
    va, vb = np.zeros(2), np.array([1.0, 0.0])
    assert combined_entry(xa, xb, va, vb) == pytest.approx(0.5 + 1.0)
    opposite = combined_entry(xa, xb, np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    assert opposite == pytest.approx(0.5 + 2.0)


def test_merge_weight_conservation_trace():
    rng = np.random.default_rng(7)
    pts = rng.random((20, 2))
    dirs = rng.standard_normal((20, 2))
    trace = []
    _, _, _, weights = kernels.glance_merge_numpy(pts, dirs, 3, trace=trace)
    assert len(trace) == 17
    for step in trace:
        assert step["total_weight"] == pytest.approx(20.0, abs=1e-9)
    assert weights.sum() == pytest.approx(20.0, abs=1e-9)


def test_merge_k_equals_n_is_identity():
    rng = np.random.default_rng(8)
    pts = rng.random((6, 2))
    dirs = rng.standard_normal((6, 2))
    labels, cents, vecs, weights = kernels.glance_merge_numpy(pts, dirs, 6)
    np.testing.assert_array_equal(labels, np.arange(6))
    np.testing.assert_array_equal(cents, pts)
    np.testing.assert_array_equal(vecs, dirs)
    np.testing.assert_array_equal(weights, np.ones(6))


@pytest.mark.parametrize("fn", BACKENDS_MERGE)
@pytest.mark.parametrize("bad_k", [0, -1, 7])
def test_merge_rejects_bad_k(fn, bad_k):
    pts = np.zeros((6, 2))
    with pytest.raises(ValueError):
        fn(pts, pts, bad_k)


def test_merge_does_not_mutate_inputs():
    rng = np.random.default_rng(9)
    pts = rng.random((10, 2))
    dirs = rng.standard_normal((10, 2))
    pts_copy, dirs_copy = pts.copy(), dirs.copy()
    kernels.glance_merge_numpy(pts, dirs, 2)
    np.testing.assert_array_equal(pts, pts_copy)
    np.testing.assert_array_equal(dirs, dirs_copy)


# ---------------------------------------------------------------------------
# dispatch


_SUBPROC_SNIPPET = """
import json
import numpy as np
from driftgce import kernels

rng = np.random.default_rng(11)
pts = rng.random((30, 3))
dirs = rng.standard_normal((30, 3))
labels, cents, vecs, weights = kernels.glance_merge(pts, dirs, 4)
print(json.dumps({
    "backend": kernels.BACKEND,
    "labels": labels.tolist(),
    "cents": cents.tolist(),
    "weights": weights.tolist(),
}))
"""


def _run_snippet(extra_env):
    import os

    env = dict(os.environ)
    env.update(extra_env)
    out = subprocess.run(
        [sys.executable, "-c", _SUBPROC_SNIPPET],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return json.loads(out.stdout)


def test_env_flag_forces_numpy_backend():
    doc = _run_snippet({"DRIFTGCE_NO_NUMBA": "1"})
    assert doc["backend"] == "numpy"


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed")
def test_backends_agree_across_processes():
    numpy_doc = _run_snippet({"DRIFTGCE_NO_NUMBA": "1"})
    numba_doc = _run_snippet({"DRIFTGCE_NO_NUMBA": ""})
    assert numba_doc["backend"] == "numba"
    assert numpy_doc["labels"] == numba_doc["labels"]
    assert numpy_doc["cents"] == numba_doc["cents"]
    assert numpy_doc["weights"] == numba_doc["weights"]
