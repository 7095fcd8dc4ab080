"""Binary probabilistic classifiers with analytic input gradients.

Two architectures share one training loop: plain logistic regression
and a one-hidden-layer tanh network with a sigmoid output. Both expose
predict_proba (probability of class 1), hard predict (ties at 0.5 go
to class 1), and the exact gradient of predict_proba with respect to
the input features, which downstream counterfactual search relies on.

Training is deterministic for a fixed TrainConfig: parameter init and
the per-epoch shuffles all come from one numpy.random.default_rng
seeded with config.seed, drawn in a fixed order (init first, then one
permutation per epoch).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgumentError, OptimizationFailureError

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    architecture: str = "mlp"
    hidden: int = 16
    learning_rate: float = 0.5
    epochs: int = 800
    batch_size: int = 64
    l2: float = 3e-4
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ("logistic", "mlp"):
            raise InvalidArgumentError(f"unknown architecture {self.architecture!r}")
        if self.hidden < 1:
            raise InvalidArgumentError("hidden must be >= 1")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise InvalidArgumentError("learning_rate, epochs and batch_size must be positive")
        if self.l2 < 0:
            raise InvalidArgumentError("l2 must be >= 0")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # overflow-safe on both tails
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Classifier:
    """Trained binary model: parameters plus the config that produced them."""

    def __init__(self, architecture: str, params: dict[str, np.ndarray], config: TrainConfig):
        self.architecture = architecture
        self.params = params
        self.config = config

    # -- inference ---------------------------------------------------------

    def _logits(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        if self.architecture == "logistic":
            return x @ p["w"] + p["b"]
        h = np.tanh(x @ p["w1"].T + p["b1"])
        return h @ p["w2"] + p["b2"]

    def predict_proba(self, x) -> np.ndarray:
        x = self._check_input(x)
        return _sigmoid(self._logits(x))

    def predict(self, x) -> np.ndarray:
        # p == 0.5 resolves to class 1
        return (self.predict_proba(x) >= 0.5).astype(np.int64)

    def input_gradient(self, x):
        """d predict_proba / d features, same leading shape as x."""
        single = np.asarray(x).ndim == 1
        x = self._check_input(x)
        p = self.params
        prob = _sigmoid(self._logits(x))
        # d sigma / d z = p (1 - p)
        dz = (prob * (1.0 - prob))[:, None]
        if self.architecture == "logistic":
            grad = dz * p["w"][None, :]
        else:
            h = np.tanh(x @ p["w1"].T + p["b1"])
            da = (1.0 - h * h) * p["w2"][None, :]
            grad = dz * (da @ p["w1"])
        return grad[0] if single else grad

    @property
    def dim(self) -> int:
        return self.params["w" if self.architecture == "logistic" else "w1"].shape[-1]

    def _check_input(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise InvalidArgumentError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("input contains non-finite values")
        return x

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "architecture": self.architecture,
            "params": {k: v.tolist() for k, v in self.params.items()},
            "train_config": asdict(self.config),
        }
        doc["model_hash"] = _hash_model_doc(doc)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Classifier":
        version = doc.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise InvalidArgumentError(f"unsupported model format_version {version!r}")
        stored = doc.get("model_hash")
        if stored is not None and stored != _hash_model_doc(doc):
            raise InvalidArgumentError("model_hash does not match the stored parameters")
        config = TrainConfig(**doc["train_config"])
        params = {k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()}
        return cls(doc["architecture"], params, config)

    @property
    def model_hash(self) -> str:
        return _hash_model_doc(self.to_dict())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


def _hash_model_doc(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k != "model_hash"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_model(path) -> Classifier:
    with open(path, encoding="utf-8") as fh:
        return Classifier.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# training


def _init_params(arch: str, d: int, hidden: int, rng) -> dict[str, np.ndarray]:
    if arch == "logistic":
        return {"w": rng.standard_normal(d) * 0.1, "b": np.zeros(1)}
    return {
        "w1": rng.standard_normal((hidden, d)) / np.sqrt(d),
        "b1": np.zeros(hidden),
        "w2": rng.standard_normal(hidden) / np.sqrt(hidden),
        "b2": np.zeros(1),
    }


def train(features: np.ndarray, labels: np.ndarray, config: TrainConfig | None = None) -> Classifier:
    """Minibatch SGD on mean cross-entropy plus an L2 penalty on weights.

    Biases are exempt from the penalty. Raises OptimizationFailureError
    if the parameters stop being finite (the classic symptom of a too
    large learning rate).
    """
    config = config or TrainConfig()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise InvalidArgumentError(f"bad training shapes {x.shape} / {y.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("features contain non-finite values")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidArgumentError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise InvalidArgumentError("training data must contain both classes")
    y = y.astype(np.float64)

    n, d = x.shape
    rng = np.random.default_rng(config.seed)
    params = _init_params(config.architecture, d, config.hidden, rng)
    lr, l2 = config.learning_rate, config.l2

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            xb, yb = x[sel], y[sel]
            m = len(sel)
            if config.architecture == "logistic":
                prob = _sigmoid(xb @ params["w"] + params["b"])
                dz = (prob - yb) / m
                params["w"] -= lr * (xb.T @ dz + l2 * params["w"])
                params["b"] -= lr * dz.sum()
            else:
                a = xb @ params["w1"].T + params["b1"]
                h = np.tanh(a)
                prob = _sigmoid(h @ params["w2"] + params["b2"])
                dz = (prob - yb) / m
                dh = dz[:, None] * params["w2"][None, :]
                da = dh * (1.0 - h * h)
                params["w2"] -= lr * (h.T @ dz + l2 * params["w2"])
                params["b2"] -= lr * dz.sum()
                params["w1"] -= lr * (da.T @ xb + l2 * params["w1"])
                params["b1"] -= lr * da.sum(axis=0)
        if any(not np.all(np.isfinite(v)) for v in params.values()):
            raise OptimizationFailureError(
                f"training diverged at epoch {epoch}", last_iterate=params
            )
    return Classifier(config.architecture, params, config)
