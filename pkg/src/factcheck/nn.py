"""From-scratch dense feed-forward classifiers with softmax cross-entropy and Adam.

Two fixed architectures back the classical baselines: a tanh net over the
10,001-dimensional TF/TF-IDF features and a relu net over concatenated
600-dimensional sentence vectors. Both end in a 2-class softmax.

Checkpoint format: magic ``FCNN``, version u16, layer count u32, then per
layer (in u32, out u32, activation u8), then per layer the weight matrix
(row-major) and bias vector as 64-bit little-endian floats.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from factcheck.corpus import PairExample
from factcheck.errors import CheckpointError
from factcheck.featurizer import BASELINE_FEATURE_DIM

ACTIVATION_CODES = {"tanh": 0, "relu": 1, "softmax": 2}
_CODE_TO_ACTIVATION = {v: k for k, v in ACTIVATION_CODES.items()}

_MAGIC = b"FCNN"
_VERSION = 1


class DenseNet:
    """Fully connected net: weights ``W[i]`` of shape (in, out), zero biases at init.

    Weight initialization is Glorot-uniform in
    ``[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]``, drawn from a
    seeded generator so construction is reproducible.
    """

    def __init__(self, layer_dims: Sequence[int], hidden_activation: str = "tanh", seed: int = 0):
        if len(layer_dims) < 2:
            raise ValueError("need at least an input and an output dimension")
        if layer_dims[-1] != 2:
            raise ValueError("final layer must have 2 classes")
        if hidden_activation not in ("tanh", "relu"):
            raise ValueError(f"unsupported hidden activation {hidden_activation!r}")

        self.layer_dims = list(layer_dims)
        self.activations = [hidden_activation] * (len(layer_dims) - 2) + ["softmax"]
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list, weights and biases interleaved per layer."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def layers(self) -> list[tuple[int, int, str]]:
        return [
            (fan_in, fan_out, act)
            for fan_in, fan_out, act in zip(
                self.layer_dims, self.layer_dims[1:], self.activations
            )
        ]


def baseline_tfidf_net(seed: int = 0) -> DenseNet:
    """Classifier over the 10,001-d TF/TF-IDF features: 50/20/2, tanh hidden layers."""
    return DenseNet([BASELINE_FEATURE_DIM, 50, 20, 2], hidden_activation="tanh", seed=seed)


def baseline_wordvec_net(seed: int = 0, embedding_dim: int = 300) -> DenseNet:
    """Classifier over concatenated sentence vectors: 200/100/50/2, relu hidden layers."""
    return DenseNet(
        [2 * embedding_dim, 200, 100, 50, 2], hidden_activation="relu", seed=seed
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def forward_batch(net: DenseNet, inputs: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of rows; each row sums to 1."""
    probs, _ = _forward_with_cache(net, inputs)
    return probs


def _forward_with_cache(net: DenseNet, inputs: np.ndarray):
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[1] != net.input_dim:
        raise ValueError(f"input dimension {x.shape[1]} != net input {net.input_dim}")
    activations = [x]
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = activations[-1] @ w + b
        if not np.all(np.isfinite(z)):
            raise ValueError("non-finite intermediate value in forward pass")
        if act == "tanh":
            x = np.tanh(z)
        elif act == "relu":
            x = np.maximum(z, 0.0)
        else:
            x = _softmax(z)
        activations.append(x)
    return activations[-1], activations


def forward(net: DenseNet, features: np.ndarray) -> np.ndarray:
    """Class probabilities (2,) for a single input vector."""
    return forward_batch(net, np.asarray(features).reshape(1, -1))[0]


def predict_prob(net: DenseNet, features: np.ndarray) -> float:
    """Probability of class 1 for a single input vector."""
    return float(forward(net, features)[1])


def loss_and_grad(
    net: DenseNet, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy over the batch plus gradients matching ``net.parameters()``.

    The softmax and cross-entropy derivatives are combined analytically at
    the logits, then backpropagated through the hidden activations.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(labels, dtype=int).ravel()
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if x.shape[0] != y.shape[0]:
        raise ValueError("inputs and labels disagree in length")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("labels must be 0 or 1")

    probs, activations = _forward_with_cache(net, x)
    n = x.shape[0]
    eps = 1e-300  # guards log(0) on a fully confident wrong prediction
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + eps)))

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads: list[np.ndarray] = []
    for layer in range(len(net.weights) - 1, -1, -1):
        prev = activations[layer]
        grads.append(delta.sum(axis=0))  # bias
        grads.append(prev.T @ delta)  # weights
        if layer > 0:
            delta = delta @ net.weights[layer].T
            act = net.activations[layer - 1]
            hidden = activations[layer]
            if act == "tanh":
                delta = delta * (1.0 - hidden * hidden)
            else:  # relu; subgradient 0 at the kink
                delta = delta * (hidden > 0.0)
    grads.reverse()
    return loss, grads


@dataclass
class AdamState:
    """Per-parameter moment estimates for the Adam update rule."""

    lr: float
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 0.001) -> "AdamState":
        return cls(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient, and state lengths disagree")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient")

    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass
class TrainConfig:
    """Mini-batch training settings; the baselines default to Adam at 0.001."""

    lr: float = 0.001
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    shuffle: bool = True
    patience: int = 3

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


def featurize_pairs(
    pairs: Sequence[PairExample],
    featurize: Callable[[str, str], np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Materialize a pair list into (features, labels) arrays."""
    rows = []
    for i, pair in enumerate(pairs):
        try:
            rows.append(np.asarray(featurize(pair.claim_text, pair.explanation_text), dtype=float))
        except Exception as exc:
            raise ValueError(f"featurization failed for pair {i}: {exc}") from exc
    return np.stack(rows), np.array([p.label for p in pairs], dtype=int)


def train(
    net: DenseNet,
    pairs: Sequence[PairExample],
    featurize: Callable[[str, str], np.ndarray],
    config: TrainConfig,
    validation_pairs: Sequence[PairExample] | None = None,
) -> list[float]:
    """Train in seeded mini-batches; returns the per-epoch mean training loss.

    With validation pairs supplied, training stops early once the validation
    loss has not improved for ``config.patience`` consecutive epochs (the
    final weights are kept as-is, not rewound).
    """
    if not pairs:
        raise ValueError("cannot train on an empty pair list")
    x, y = featurize_pairs(pairs, featurize)
    val_xy = featurize_pairs(validation_pairs, featurize) if validation_pairs else None

    params = net.parameters()
    state = AdamState.for_params(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    n = x.shape[0]

    history: list[float] = []
    best_val = np.inf
    stale = 0
    for _ in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        seen = 0
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = loss_and_grad(net, x[batch], y[batch])
            adam_step(state, params, grads)
            loss_sum += loss * len(batch)
            seen += len(batch)
        history.append(loss_sum / seen)

        if val_xy is not None:
            val_loss, _ = loss_and_grad(net, *val_xy)
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    return history


def classification_accuracy(
    net: DenseNet,
    pairs: Sequence[PairExample],
    featurize: Callable[[str, str], np.ndarray],
) -> float:
    """Fraction of pairs whose argmax class matches the label."""
    x, y = featurize_pairs(pairs, featurize)
    predicted = forward_batch(net, x).argmax(axis=1)
    return float(np.mean(predicted == y))


def save_net(net: DenseNet, path: str | Path) -> None:
    """Write a deterministic binary checkpoint."""
    chunks = [_MAGIC, struct.pack("<HI", _VERSION, len(net.weights))]
    for fan_in, fan_out, act in net.layers():
        chunks.append(struct.pack("<IIB", fan_in, fan_out, ACTIVATION_CODES[act]))
    for w, b in zip(net.weights, net.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_net(path: str | Path) -> DenseNet:
    """Load a checkpoint written by :func:`save_net`."""
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    offset = 4
    try:
        version, n_layers = struct.unpack_from("<HI", data, offset)
        offset += struct.calcsize("<HI")
        if version != _VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        specs = []
        for _ in range(n_layers):
            fan_in, fan_out, code = struct.unpack_from("<IIB", data, offset)
            offset += struct.calcsize("<IIB")
            if code not in _CODE_TO_ACTIVATION:
                raise CheckpointError(f"{path}: unknown activation code {code}")
            specs.append((fan_in, fan_out, _CODE_TO_ACTIVATION[code]))

        if not specs or specs[-1][2] != "softmax" or specs[-1][1] != 2:
            raise CheckpointError(f"{path}: checkpoint does not end in a 2-class softmax")
        hidden_acts = {act for _, _, act in specs[:-1]}
        if len(hidden_acts) > 1:
            raise CheckpointError(f"{path}: mixed hidden activations are unsupported")
        dims = [specs[0][0]] + [fan_out for _, fan_out, _ in specs]
        for (fan_in, _, _), expected in zip(specs, dims):
            if fan_in != expected:
                raise CheckpointError(f"{path}: layer dimensions do not chain")
        hidden = hidden_acts.pop() if hidden_acts else "tanh"
        if hidden not in ("tanh", "relu"):
            raise CheckpointError(f"{path}: invalid hidden activation {hidden!r}")

        net = DenseNet(dims, hidden_activation=hidden)
        for i, (fan_in, fan_out, _) in enumerate(specs):
            w_size = fan_in * fan_out * 8
            net.weights[i] = (
                np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
                .reshape(fan_in, fan_out)
                .copy()
            )
            offset += w_size
            net.biases[i] = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset).copy()
            offset += fan_out * 8
    except (struct.error, ValueError):
        raise CheckpointError(f"{path}: truncated checkpoint") from None
    if offset != len(data):
        raise CheckpointError(f"{path}: trailing bytes in checkpoint")
    if any(not np.all(np.isfinite(w)) for w in net.weights):
        raise CheckpointError(f"{path}: non-finite weights")
    return net
