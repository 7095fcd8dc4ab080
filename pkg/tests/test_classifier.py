"""Training determinism, inference, analytic gradients, and model files."""

import json

import numpy as np
import pytest

from conftest import two_blobs
from driftgce.classifier import Classifier, TrainConfig, load_model, train
from driftgce.errors import InvalidArgumentError, OptimizationFailureError
from oracles import finite_diff_gradient


# ---------------------------------------------------------------------------
# config


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(architecture="tree"),
        dict(hidden=0),
        dict(learning_rate=0.0),
        dict(epochs=0),
        dict(batch_size=0),
        dict(l2=-1e-3),
    ],
)
def test_train_config_rejects_bad_values(kwargs):
    with pytest.raises(InvalidArgumentError):
        TrainConfig(**kwargs)


# ---------------------------------------------------------------------------
# training


def test_training_is_deterministic_per_seed(blob_data):
    feats, labels = blob_data
    cfg = TrainConfig(epochs=40, seed=3)
    m1 = train(feats, labels, cfg)
    m2 = train(feats, labels, cfg)
    for key in m1.params:
        np.testing.assert_array_equal(m1.params[key], m2.params[key])
    assert m1.model_hash == m2.model_hash


def test_training_seed_changes_parameters(blob_data):
    feats, labels = blob_data
    m1 = train(feats, labels, TrainConfig(epochs=40, seed=0))
    m2 = train(feats, labels, TrainConfig(epochs=40, seed=1))
    assert m1.model_hash != m2.model_hash


@pytest.mark.parametrize("arch", ["logistic", "mlp"])
def test_both_architectures_separate_blobs(arch, blob_data):
    feats, labels = blob_data
    model = train(feats, labels, TrainConfig(architecture=arch, epochs=150, seed=0))
    assert (model.predict(feats) == labels).mean() > 0.98


def test_train_rejects_bad_inputs(blob_data):
    feats, labels = blob_data
    with pytest.raises(InvalidArgumentError):
        train(feats[:10], labels[:9])
    with pytest.raises(InvalidArgumentError):
        train(np.full((10, 2), np.nan), labels[:10])
    with pytest.raises(InvalidArgumentError):
        train(feats[:10], np.full(10, 2))
    with pytest.raises(InvalidArgumentError):
        train(feats[:10], np.zeros(10, dtype=np.int64))


def test_train_reports_divergence_with_last_iterate(blob_data):
    feats, labels = blob_data
    huge = TrainConfig(architecture="logistic", learning_rate=1e12, epochs=30, seed=0)
    with pytest.raises(OptimizationFailureError) as err:
        train(feats * 1e3, labels, huge)
    assert isinstance(err.value.last_iterate, dict)


# ---------------------------------------------------------------------------
# inference


def test_predict_proba_shapes_and_range(blob_model, blob_data):
    feats, _ = blob_data
    p = blob_model.predict_proba(feats)
    assert p.shape == (len(feats),)
    assert np.all((p > 0) & (p < 1))
    single = blob_model.predict_proba(feats[0])
    assert single.shape == (1,)


def test_predict_tie_goes_to_class_one():
    # zero weights and bias give exactly p = 0.5 everywhere
    model = Classifier(
        "logistic", {"w": np.zeros(2), "b": np.zeros(1)}, TrainConfig(architecture="logistic")
    )
    assert model.predict_proba([[0.3, 0.7]])[0] == 0.5
    assert model.predict([[0.3, 0.7]])[0] == 1


def test_inference_rejects_bad_inputs(blob_model):
    with pytest.raises(InvalidArgumentError):
        blob_model.predict_proba(np.zeros((3, 5)))
    with pytest.raises(InvalidArgumentError):
        blob_model.predict_proba([[np.inf, 0.0]])


# ---------------------------------------------------------------------------
# input gradients


@pytest.mark.parametrize("arch", ["logistic", "mlp"])
def test_input_gradient_matches_finite_differences(arch):
    rng = np.random.default_rng(17)
    for trial in range(10):
        feats, labels = two_blobs(n=80, seed=trial)
        model = train(feats, labels, TrainConfig(architecture=arch, epochs=60, seed=trial))
        x = rng.random(2)
        analytic = model.input_gradient(x)
        numeric = finite_diff_gradient(model, x)
        scale = max(float(np.abs(numeric).max()), 1e-12)
        assert float(np.abs(analytic - numeric).max()) / scale < 1e-4


def test_input_gradient_batch_matches_single(blob_model):
    rng = np.random.default_rng(18)
    pts = rng.random((6, 2))
    batch = blob_model.input_gradient(pts)
    assert batch.shape == (6, 2)
    for i in range(6):
        np.testing.assert_allclose(batch[i], blob_model.input_gradient(pts[i]), atol=1e-12)


def test_input_gradient_points_toward_higher_probability(blob_model):
    x = np.array([0.5, 0.5])
    g = blob_model.input_gradient(x)
    step = 1e-4 * g / np.linalg.norm(g)
    assert blob_model.predict_proba(x + step)[0] > blob_model.predict_proba(x)[0]


# ---------------------------------------------------------------------------
# serialization


def test_model_roundtrip_preserves_everything(tmp_path, blob_model):
    path = tmp_path / "m.json"
    blob_model.save(path)
    back = load_model(path)
    assert back.architecture == blob_model.architecture
    assert back.config == blob_model.config
    assert back.model_hash == blob_model.model_hash
    x = np.random.default_rng(19).random((20, 2))
    np.testing.assert_array_equal(back.predict_proba(x), blob_model.predict_proba(x))


def test_tampered_model_file_is_rejected(tmp_path, blob_model):
    path = tmp_path / "m.json"
    blob_model.save(path)
    doc = json.loads(path.read_text())
    doc["params"]["b2"] = [0.42]
    path.write_text(json.dumps(doc))
    with pytest.raises(InvalidArgumentError):
        load_model(path)


def test_wrong_model_format_version_is_rejected(tmp_path, blob_model):
    path = tmp_path / "m.json"
    blob_model.save(path)
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(InvalidArgumentError):
        load_model(path)


def test_model_hash_ignores_only_the_hash_field(blob_model):
    doc = blob_model.to_dict()
    assert doc["model_hash"] == blob_model.model_hash
    redone = Classifier.from_dict(doc)
    assert redone.model_hash == blob_model.model_hash
