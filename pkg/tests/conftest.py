import numpy as np
import pytest

from driftgce.classifier import TrainConfig, train


def two_blobs(n=120, seed=0, left=(0.25, 0.5), right=(0.75, 0.5), std=0.06):
    """Linearly separable two-class sample in the unit box."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = np.clip(rng.standard_normal((half, 2)) * std + left, 0, 1)
    b = np.clip(rng.standard_normal((n - half, 2)) * std + right, 0, 1)
    feats = np.vstack([a, b])
    labels = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(n - half, dtype=np.int64)])
    return feats, labels


FAST_TRAIN = TrainConfig(epochs=150, seed=0)


@pytest.fixture(scope="session")
def blob_data():
    return two_blobs()


@pytest.fixture(scope="session")
def blob_model(blob_data):
    feats, labels = blob_data
    return train(feats, labels, FAST_TRAIN)


@pytest.fixture(scope="session")
def logistic_model(blob_data):
    feats, labels = blob_data
    return train(feats, labels, TrainConfig(architecture="logistic", epochs=150, seed=0))
