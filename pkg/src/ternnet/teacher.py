"""Teacher network: a real-valued MLP whose hidden neurons fire ternary values.

Hidden layers use tanh-family activations so the activation value rho lies
in [-1, 1]; a neuron then emits +1 with probability rho (if positive), -1
with probability -rho (if negative) and 0 otherwise.  Training runs SGD on
softmax cross-entropy with the sampled ternary values in the forward pass
and the derivative of rho in the backward pass (straight-through
expectation).  Deterministic evaluation propagates rho itself.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from ternnet.linalg import Rng, activation, matmul
from ternnet.runtime import _meta_bytes, read_container, write_container


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class DenseLayer:
    weights: np.ndarray  # (fan_out, fan_in) float64
    bias: np.ndarray  # (fan_out,) float64
    activation: str = "tanh"

    @property
    def fan_in(self):
        return self.weights.shape[1]

    @property
    def fan_out(self):
        return self.weights.shape[0]


@dataclass
class RealMlp:
    """Hidden stack of stochastically-firing layers plus a softmax classifier."""

    hidden: list  # list[DenseLayer]
    output: DenseLayer

    def __post_init__(self):
        dims = [lay.fan_in for lay in self.hidden] + [self.output.fan_in]
        for lay, expected in zip(self.hidden, dims[1:]):
            if lay.fan_out != expected:
                raise ValueError("consecutive layer dimensions are incompatible")

    @property
    def input_dim(self):
        return self.hidden[0].fan_in if self.hidden else self.output.fan_in

    @property
    def num_classes(self):
        return self.output.fan_out

    def dims(self) -> list:
        return [self.input_dim] + [lay.fan_out for lay in self.hidden] + [self.num_classes]

    def clone(self) -> "RealMlp":
        return copy.deepcopy(self)


@dataclass
class TrainConfig:
    epochs: int = 80
    batch_size: int = 100
    learning_rate: float = 0.1
    seed: int = 0
    early_stop_patience: int = 20
    dropout_rate: float | None = None
    activation: str = "tanh"
    # Weight of the hinge mean(relu(1 - |y|)) on hidden pre-activations.
    # Pushing |y| past 1 makes the ternary firing near-deterministic, which
    # is what lets a student neuron mimic its teacher closely; ramped in
    # after a warmup so the classifier forms first.
    saturation_weight: float = 0.0
    saturation_warmup: float = 0.25

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.dropout_rate is not None and not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.saturation_weight < 0:
            raise ValueError("saturation_weight must be >= 0")


def transfer(layer: DenseLayer, x) -> np.ndarray:
    """Pre-activation W x + b for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != layer.fan_in:
        raise ValueError(f"input of length {x.shape} does not match fan_in {layer.fan_in}")
    return matmul(layer.weights, x[:, None])[:, 0] + layer.bias


def ternary_probs(y, act_name: str = "tanh") -> np.ndarray:
    """Per-neuron firing distribution (p_minus, p_zero, p_plus) from pre-activations."""
    act, _ = activation(act_name)
    rho = np.asarray(act(np.asarray(y, dtype=np.float64)))
    p_plus = np.clip(rho, 0.0, 1.0)
    p_minus = np.clip(-rho, 0.0, 1.0)
    p_zero = 1.0 - p_plus - p_minus
    return np.stack([p_minus, p_zero, p_plus], axis=-1)


def teacher_classes(probs: np.ndarray) -> np.ndarray:
    """Most-probable ternary output per neuron; ties resolve to 0."""
    p_minus = probs[..., 0]
    p_zero = probs[..., 1]
    p_plus = probs[..., 2]
    return ((p_plus > p_zero).astype(np.int8) - (p_minus > p_zero).astype(np.int8))


def stochastic_fire(rng: Rng, probs) -> np.ndarray:
    """Draw ternary values elementwise from (p_minus, p_zero, p_plus) triples."""
    probs = np.asarray(probs, dtype=np.float64)
    u = rng.random(size=probs.shape[:-1])
    out = np.zeros(probs.shape[:-1], dtype=np.int8)
    out[u < probs[..., 0]] = -1
    out[u >= probs[..., 0] + probs[..., 1]] = 1
    return out


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _init_layer(rng: Rng, fan_in: int, fan_out: int, act_name: str) -> DenseLayer:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
    return DenseLayer(weights=w, bias=np.zeros(fan_out), activation=act_name)


def init_mlp(rng: Rng, arch: list, act_name: str = "tanh") -> RealMlp:
    """Glorot-uniform MLP for layer sizes arch = [in, h1, ..., hk, out]."""
    if len(arch) < 2:
        raise ValueError("arch needs at least an input and an output dimension")
    hidden = [_init_layer(rng, arch[i], arch[i + 1], act_name) for i in range(len(arch) - 2)]
    output = _init_layer(rng, arch[-2], arch[-1], "softmax")
    return RealMlp(hidden=hidden, output=output)


def _forward_train(model: RealMlp, x, rng: Rng, dropout: float | None):
    """Sampled-ternary forward pass; returns caches for the backward pass."""
    a = x
    caches = []
    for lay in model.hidden:
        y = a @ lay.weights.T + lay.bias
        act, act_grad = activation(lay.activation)
        rho = act(y)
        u = rng.random(size=rho.shape)
        fired = np.sign(rho) * (u < np.abs(rho))
        if dropout:
            keep = rng.random(size=fired.shape) >= dropout
            fired = fired * keep / (1.0 - dropout)
        caches.append((a, act_grad(y), y))
        a = fired
    logits = a @ model.output.weights.T + model.output.bias
    caches.append((a, None, None))
    return logits, caches


def expected_activations(model: RealMlp, x) -> list:
    """Deterministic forward: per hidden layer (pre-activation, rho)."""
    a = np.asarray(x, dtype=np.float64)
    out = []
    for lay in model.hidden:
        y = a @ lay.weights.T + lay.bias
        act, _ = activation(lay.activation)
        a = act(y)
        out.append((y, a))
    return out

def expected_logits(model: RealMlp, x) -> np.ndarray:
    acts = expected_activations(model, x)
    a = acts[-1][1] if acts else np.asarray(x, dtype=np.float64)
    return a @ model.output.weights.T + model.output.bias


def expected_predict(model: RealMlp, x) -> np.ndarray:
    return expected_logits(model, x).argmax(axis=1).astype(np.int32)


def expected_accuracy(model: RealMlp, inputs, labels) -> float:
    return float(np.mean(expected_predict(model, inputs) == np.asarray(labels)))


def _forward_expect(model: RealMlp, x):
    """Expectation-mode forward with the same cache layout as _forward_train."""
    a = np.asarray(x, dtype=np.float64)
    caches = []
    for lay in model.hidden:
        y = a @ lay.weights.T + lay.bias
        act, act_grad = activation(lay.activation)
        caches.append((a, act_grad(y), y))
        a = act(y)
    logits = a @ model.output.weights.T + model.output.bias
    caches.append((a, None, None))
    return logits, caches


def loss_and_gradients(
    model: RealMlp,
    inputs,
    labels,
    rng: Rng | None = None,
    dropout: float | None = None,
    saturation: float = 0.0,
):
    """Cross-entropy loss and parameter gradients for one batch.

    With an rng the forward pass samples the ternary firing (the training
    path); without one it propagates the expectation rho, which makes the
    gradient a deterministic function checkable against finite differences.
    Returns (loss, accuracy, grads) with grads as a list of (dW, db) per
    hidden layer plus the output layer last.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y_onehot = np.eye(model.num_classes)[np.asarray(labels)]
    if rng is None:
        logits, caches = _forward_expect(model, x)
    else:
        logits, caches = _forward_train(model, x, rng, dropout)
    probs = _softmax(logits)
    loss = -np.mean(np.log(np.sum(probs * y_onehot, axis=1) + 1e-12))
    acc = float(np.mean(logits.argmax(axis=1) == y_onehot.argmax(axis=1)))

    d = (probs - y_onehot) / len(x)
    grads = [None] * (len(model.hidden) + 1)
    grads[-1] = (d.T @ caches[-1][0], d.sum(axis=0))
    d = d @ model.output.weights
    for li in range(len(model.hidden) - 1, -1, -1):
        a_prev, gate, y = caches[li]
        d = d * gate
        if saturation > 0.0:
            # Hinge relu(1 - |y|): drives pre-activations out of the
            # indecisive band so the ternary firing becomes deterministic.
            loss += saturation * float(np.mean(np.maximum(1.0 - np.abs(y), 0.0)))
            d = d - (saturation / y.size) * np.sign(y) * (np.abs(y) < 1.0)
        grads[li] = (d.T @ a_prev, d.sum(axis=0))
        if li > 0:
            d = d @ model.hidden[li].weights
    return loss, acc, grads


def _sgd_epoch(model, X, Y_labels, cfg, rng, lr, saturation):
    order = rng.permutation(len(X))
    total_loss = 0.0
    total_acc = 0.0
    for start in range(0, len(X), cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        loss, acc, grads = loss_and_gradients(model, X[idx], Y_labels[idx], rng, cfg.dropout_rate, saturation)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss {loss} at sample offset {start}")
        total_loss += loss * len(idx)
        total_acc += acc * len(idx)
        for lay, (gw, gb) in zip(model.hidden + [model.output], grads):
            lay.weights -= lr * gw
            lay.bias -= lr * gb
    return total_loss / len(X), total_acc / len(X)


@dataclass
class TrainResult:
    model: RealMlp
    history: list = field(default_factory=list)  # per-epoch dict rows
    best_epoch: int = 0
    best_val_acc: float = 0.0


def _saturation_schedule(cfg: TrainConfig, epoch: int, max_epochs: int) -> float:
    """Ramp the saturation hinge from zero at warmup to full by 2x warmup."""
    if cfg.saturation_weight <= 0.0:
        return 0.0
    start = cfg.saturation_warmup * max_epochs
    ramp = max(start, 1.0)
    return cfg.saturation_weight * float(np.clip((epoch - start) / ramp, 0.0, 1.0))


def _fit(
    model: RealMlp,
    train_inputs,
    train_labels,
    val_inputs,
    val_labels,
    cfg: TrainConfig,
    rng: Rng,
    max_epochs: int,
    saturation_full: bool = False,
) -> TrainResult:
    X = np.asarray(train_inputs, dtype=np.float64)
    Y = np.asarray(train_labels)
    best = model.clone()
    best_acc = None
    best_epoch = 0
    history = []
    for epoch in range(1, max_epochs + 1):
        sat = cfg.saturation_weight if saturation_full else _saturation_schedule(cfg, epoch, max_epochs)
        train_loss, train_acc = _sgd_epoch(model, X, Y, cfg, rng, cfg.learning_rate, sat)
        val_acc = expected_accuracy(model, val_inputs, val_labels)
        history.append(
            {"epoch": epoch, "train_loss": train_loss, "train_acc": train_acc, "val_acc": val_acc}
        )
        # Snapshots only once the saturation pressure is at full strength;
        # earlier models fire too indecisively to be worth keeping.
        eligible = sat >= cfg.saturation_weight
        if eligible and (best_acc is None or val_acc > best_acc):
            best_acc = val_acc
            best_epoch = epoch
            best = model.clone()
        if best_acc is not None and epoch - best_epoch > cfg.early_stop_patience:
            break
    if best_acc is None:
        best_acc = expected_accuracy(model, val_inputs, val_labels)
        best = model.clone()
        best_epoch = len(history)
    return TrainResult(model=best, history=history, best_epoch=best_epoch, best_val_acc=best_acc)


def train_teacher(ds, arch: list, cfg: TrainConfig, val=None) -> TrainResult:
    """Train a teacher MLP with early stopping on validation accuracy.

    `arch` lists layer sizes including input and output dims.  When no
    validation set is supplied the last sixth of `ds` is held out.
    """
    from ternnet.data import split

    if arch[0] != ds.input_dim:
        raise ValueError(f"arch input dim {arch[0]} does not match dataset dim {ds.input_dim}")
    if arch[-1] != ds.num_classes:
        raise ValueError(f"arch output dim {arch[-1]} does not match {ds.num_classes} classes")
    if val is None:
        n_val = max(1, len(ds) // 6)
        ds, val = split(ds, len(ds) - n_val, n_val)
    rng = Rng(cfg.seed)
    model = init_mlp(rng, arch, cfg.activation)
    return _fit(model, ds.inputs, ds.labels, val.inputs, val.labels, cfg, rng, cfg.epochs)


RETRAIN_EPOCH_CAP = 50


def staggered_retrain(model: RealMlp, student_prefix: list, ds, cfg: TrainConfig, val=None) -> TrainResult:
    """Fine-tune the layers not yet ternarized, behind a frozen student prefix.

    The first len(student_prefix) layers are replaced by their ternary
    student equivalents for every forward pass and receive no updates; the
    remaining real layers train as usual (capped at 50 epochs).  The
    returned model keeps the original real prefix layers untouched.
    """
    from ternnet.data import split
    from ternnet.runtime import forward_prefix

    k = len(student_prefix)
    if k >= len(model.hidden) + 1:
        raise ValueError("frozen prefix must leave at least the output layer trainable")
    if val is None:
        n_val = max(1, len(ds) // 6)
        ds, val = split(ds, len(ds) - n_val, n_val)

    x_train = forward_prefix(student_prefix, ds.inputs).astype(np.float64)
    x_val = forward_prefix(student_prefix, val.inputs).astype(np.float64)

    sub = RealMlp(hidden=[copy.deepcopy(l) for l in model.hidden[k:]], output=copy.deepcopy(model.output))
    rng = Rng(cfg.seed).split(2)[1]
    res = _fit(sub, x_train, ds.labels, x_val, val.labels, cfg, rng, min(cfg.epochs, RETRAIN_EPOCH_CAP), saturation_full=True)

    merged = RealMlp(hidden=[copy.deepcopy(l) for l in model.hidden[:k]] + res.model.hidden, output=res.model.output)
    return TrainResult(model=merged, history=res.history, best_epoch=res.best_epoch, best_val_acc=res.best_val_acc)


def save_teacher(model: RealMlp, path, meta: dict | None = None) -> None:
    info = dict(meta or {})
    info["kind"] = "real_mlp"
    info["dims"] = model.dims()
    info["activations"] = [lay.activation for lay in model.hidden]
    sections = {"meta": _meta_bytes(info)}
    for i, lay in enumerate(model.hidden):
        sections[f"L{i}.w"] = lay.weights.astype("<f8").tobytes()
        sections[f"L{i}.b"] = lay.bias.astype("<f8").tobytes()
    sections["out.w"] = model.output.weights.astype("<f8").tobytes()
    sections["out.b"] = model.output.bias.astype("<f8").tobytes()
    write_container(path, sections)


def load_teacher(path) -> tuple:
    from ternnet.runtime import ContainerError

    sections = read_container(path)
    meta = json.loads(sections["meta"])
    if meta.get("kind") != "real_mlp":
        raise ContainerError(f"{path}: container holds {meta.get('kind')!r}, not a teacher checkpoint")
    dims = meta["dims"]
    acts = meta["activations"]
    hidden = []
    for i in range(len(dims) - 2):
        w = np.frombuffer(sections[f"L{i}.w"], dtype="<f8").reshape(dims[i + 1], dims[i]).copy()
        b = np.frombuffer(sections[f"L{i}.b"], dtype="<f8").copy()
        hidden.append(DenseLayer(weights=w, bias=b, activation=acts[i]))
    w = np.frombuffer(sections["out.w"], dtype="<f8").reshape(dims[-1], dims[-2]).copy()
    b = np.frombuffer(sections["out.b"], dtype="<f8").copy()
    model = RealMlp(hidden=hidden, output=DenseLayer(weights=w, bias=b, activation="softmax"))
    return model, meta
