"""Small feed-forward and convolutional networks in plain numpy.

Networks are tiny (at most a few thousand parameters) and the meta-classifier
needs raw access to every weight, so everything here is hand-written:
forward pass, backprop, minibatch SGD with momentum, and a canonical JSON
format.

Conventions that are part of the model-file contract:

* ``Dense(n_in, n_out)`` weights are ``(n_out, n_in)``; output is ``W @ x + b``.
* ``Conv2D(k1, k2, c_in, c_out)`` kernels are ``(k1, k2, c_in, c_out)``,
  valid padding, stride 1, on ``(H, W, C)`` inputs.
* ``Flatten`` is row-major over ``(H, W, C)``.
* The last layer is ``SigmoidOutput`` on a single unit. A probability of
  exactly 0.5 predicts label 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _seeding
from .errors import (
    BadLayerIndex,
    IncompatibleArch,
    MalformedDocument,
    NumericalDivergence,
    ShapeMismatch,
)

NET_FORMAT = "distinf-net/1"
PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class Dense:
    n_in: int
    n_out: int


@dataclass(frozen=True)
class Conv2D:
    k1: int
    k2: int
    c_in: int
    c_out: int


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class SigmoidOutput:
    pass


PARAM_LAYERS = (Dense, Conv2D)


def _layer_to_json(layer):
    if isinstance(layer, Dense):
        return {"kind": "dense", "in": layer.n_in, "out": layer.n_out}
    if isinstance(layer, Conv2D):
        return {"kind": "conv2d", "k1": layer.k1, "k2": layer.k2, "c_in": layer.c_in, "c_out": layer.c_out}
    return {"kind": {Relu: "relu", Flatten: "flatten", SigmoidOutput: "sigmoid"}[type(layer)]}


def _layer_from_json(doc):
    kind = doc["kind"]
    if kind == "dense":
        return Dense(int(doc["in"]), int(doc["out"]))
    if kind == "conv2d":
        return Conv2D(int(doc["k1"]), int(doc["k2"]), int(doc["c_in"]), int(doc["c_out"]))
    try:
        return {"relu": Relu, "flatten": Flatten, "sigmoid": SigmoidOutput}[kind]()
    except KeyError:
        raise MalformedDocument(f"unknown layer kind {kind!r}") from None


def infer_shapes(arch, input_shape):
    """Shape after each layer; raises :class:`IncompatibleArch` on mismatch."""
    shape = tuple(input_shape)
    shapes = []
    for i, layer in enumerate(arch):
        if isinstance(layer, Dense):
            if min(layer.n_in, layer.n_out) < 1 or shape != (layer.n_in,):
                raise IncompatibleArch(f"layer {i}: Dense({layer.n_in}, {layer.n_out}) on input {shape}")
            shape = (layer.n_out,)
        elif isinstance(layer, Conv2D):
            if min(layer.k1, layer.k2, layer.c_in, layer.c_out) < 1:
                raise IncompatibleArch(f"layer {i}: nonpositive conv dimension")
            if len(shape) != 3 or shape[2] != layer.c_in or shape[0] < layer.k1 or shape[1] < layer.k2:
                raise IncompatibleArch(f"layer {i}: {layer} on input {shape}")
            shape = (shape[0] - layer.k1 + 1, shape[1] - layer.k2 + 1, layer.c_out)
        elif isinstance(layer, Flatten):
            shape = (int(np.prod(shape)),)
        elif isinstance(layer, SigmoidOutput):
            if shape != (1,) or i != len(arch) - 1:
                raise IncompatibleArch("SigmoidOutput must be the last layer, on a single unit")
        elif not isinstance(layer, Relu):
            raise IncompatibleArch(f"layer {i}: unknown layer {layer!r}")
        shapes.append(shape)
    if not arch or not isinstance(arch[-1], SigmoidOutput):
        raise IncompatibleArch("architecture must end with SigmoidOutput")
    return shapes


@dataclass(frozen=True, eq=False)
class NetParams:
    """Immutable network: architecture, input shape and per-layer ``(weights, bias)``.

    ``layers`` has one entry per parameterized layer, in order.
    """

    arch: tuple
    input_shape: tuple
    layers: tuple

    def __post_init__(self):
        infer_shapes(self.arch, self.input_shape)
        pl = [l for l in self.arch if isinstance(l, PARAM_LAYERS)]
        if len(pl) != len(self.layers):
            raise ShapeMismatch("number of parameter blocks does not match the architecture")
        frozen = []
        for spec, (w, b) in zip(pl, self.layers):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            want = (spec.n_out, spec.n_in) if isinstance(spec, Dense) else (spec.k1, spec.k2, spec.c_in, spec.c_out)
            n_out = spec.n_out if isinstance(spec, Dense) else spec.c_out
            if w.shape != want or b.shape != (n_out,):
                raise ShapeMismatch(f"{spec}: got weights {w.shape}, bias {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite parameter")
            w.flags.writeable = False
            b.flags.writeable = False
            frozen.append((w, b))
        object.__setattr__(self, "layers", tuple(frozen))
        object.__setattr__(self, "arch", tuple(self.arch))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))

    @property
    def param_arch(self):
        return [l for l in self.arch if isinstance(l, PARAM_LAYERS)]

    @property
    def relu_indices(self):
        return [i for i, l in enumerate(self.arch) if isinstance(l, Relu)]

    def replace(self, layers):
        return NetParams(self.arch, self.input_shape, tuple(layers))

    def n_params(self):
        return sum(w.size + b.size for w, b in self.layers)


def _default_input_shape(arch):
    first = next((l for l in arch if isinstance(l, PARAM_LAYERS)), None)
    if isinstance(first, Dense):
        return (first.n_in,)
    raise IncompatibleArch("a convolutional architecture needs an explicit input_shape (H, W, C)")


def init(arch, seed, input_shape=None):
    """Fresh parameters: uniform(+-sqrt(6 / fan_in)) weights, zero biases."""
    arch = tuple(arch)
    if input_shape is None:
        input_shape = _default_input_shape(arch)
    infer_shapes(arch, input_shape)
    rng = np.random.default_rng(seed)
    layers = []
    for spec in arch:
        if isinstance(spec, Dense):
            lim = math.sqrt(6.0 / spec.n_in)
            layers.append((rng.uniform(-lim, lim, (spec.n_out, spec.n_in)), np.zeros(spec.n_out)))
        elif isinstance(spec, Conv2D):
            lim = math.sqrt(6.0 / (spec.k1 * spec.k2 * spec.c_in))
            shape = (spec.k1, spec.k2, spec.c_in, spec.c_out)
            layers.append((rng.uniform(-lim, lim, shape), np.zeros(spec.c_out)))
    return NetParams(arch, tuple(input_shape), tuple(layers))


def _as_batch(net, x):
    x = np.asarray(x, dtype=np.float64)
    size = int(np.prod(net.input_shape))
    if x.shape == tuple(net.input_shape) or x.shape == (size,):
        x = x.reshape((1,) + net.input_shape)
    elif x.ndim >= 2 and int(np.prod(x.shape[1:])) == size:
        x = x.reshape((x.shape[0],) + net.input_shape)
    else:
        raise ShapeMismatch(f"input of shape {x.shape} does not match {net.input_shape}")
    return x


def _conv_forward(x, k, b):
    k1, k2 = k.shape[:2]
    win = np.lib.stride_tricks.sliding_window_view(x, (k1, k2), axis=(1, 2))
    # win: (B, Ho, Wo, C_in, k1, k2)
    return np.einsum("bhwcij,ijcd->bhwd", win, k, optimize=True) + b, win


def _conv_backward(dout, x_shape, k, win):
    k1, k2 = k.shape[:2]
    dk = np.einsum("bhwcij,bhwd->ijcd", win, dout, optimize=True)
    db = dout.sum(axis=(0, 1, 2))
    dx = np.zeros(x_shape)
    ho, wo = dout.shape[1:3]
    for i in range(k1):
        for j in range(k2):
            dx[:, i : i + ho, j : j + wo, :] += dout @ k[i, j].T
    return dx, dk, db


def _forward(arch, layers, x, stop=None):
    """Run a network on a batch; returns (output, cache for backprop)."""
    cache = []
    p = 0
    for idx, layer in enumerate(arch):
        if isinstance(layer, Dense):
            w, b = layers[p]
            cache.append(x)
            x = x @ w.T + b
            p += 1
        elif isinstance(layer, Conv2D):
            w, b = layers[p]
            out, win = _conv_forward(x, w, b)
            cache.append((x.shape, win))
            x = out
            p += 1
        elif isinstance(layer, Relu):
            x = np.maximum(x, 0.0)
            cache.append(x)
        elif isinstance(layer, Flatten):
            cache.append(x.shape)
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, SigmoidOutput):
            cache.append(None)
            x = _sigmoid(x)
        if stop is not None and idx == stop:
            break
    return x, cache


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_proba(net, X):
    """Probability of label 1 for each row of a batch."""
    out, _ = _forward(net.arch, net.layers, _as_batch(net, X))
    return out[:, 0]


def forward(net, x):
    """Probability of label 1 for a single input (feature vector or image)."""
    x = np.asarray(x, dtype=np.float64)
    if int(np.prod(x.shape)) != int(np.prod(net.input_shape)):
        raise ShapeMismatch(f"input of shape {x.shape} does not match {net.input_shape}")
    return float(predict_proba(net, x.reshape((1,) + net.input_shape))[0])


def bce_loss(p, y):
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1.0 - p)))


def loss_and_grads(net, X, y):
    """Mean binary cross-entropy on a batch and its gradient per parameter block."""
    return _loss_grads(net.arch, net.layers, _as_batch(net, X), y)


def _loss_grads(arch, layers, xb, y):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    out, cache = _forward(arch, layers, xb)
    p = out[:, 0]
    loss = bce_loss(p, y)
    # d(loss)/d(logit) for the sigmoid + BCE pair
    g = ((p - y) / len(y))[:, None]
    grads = [None] * len(layers)
    pidx = len(layers)
    for layer, c in zip(reversed(arch), reversed(cache)):
        if isinstance(layer, SigmoidOutput):
            continue
        if isinstance(layer, Relu):
            g = g * (c > 0)
        elif isinstance(layer, Flatten):
            g = g.reshape(c)
        elif isinstance(layer, Dense):
            pidx -= 1
            w, _ = layers[pidx]
            grads[pidx] = (g.T @ c, g.sum(axis=0))
            g = g @ w
        elif isinstance(layer, Conv2D):
            pidx -= 1
            w, _ = layers[pidx]
            x_shape, win = c
            g, dk, db = _conv_backward(g, x_shape, w, win)
            grads[pidx] = (dk, db)
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not self.learning_rate > 0 or not 0.0 <= self.momentum < 1.0:
            raise ValueError("learning_rate must be > 0 and momentum in [0, 1)")


def _xy(data):
    if hasattr(data, "X"):
        return data.X, data.y
    X, y = data
    return np.asarray(X, dtype=np.float64), np.asarray(y)


def train(net, data, cfg):
    """Minibatch SGD with momentum on binary cross-entropy; returns a new network.

    Fixed epoch count, no early stopping. Epoch ``e`` shuffles with a
    generator seeded from ``(cfg.seed, e)``.
    """
    X, y = _xy(data)
    X = _as_batch(net, X)
    y = np.asarray(y, dtype=np.float64)
    m = len(y)
    params = [(w.copy(), b.copy()) for w, b in net.layers]
    vel = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(_seeding.mix(cfg.seed, epoch)).permutation(m)
        for start in range(0, m, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = _loss_grads(net.arch, params, X[idx], y[idx])
            for (w, b), (vw, vb), (gw, gb) in zip(params, vel, grads):
                vw *= cfg.momentum
                vw -= cfg.learning_rate * gw
                vb *= cfg.momentum
                vb -= cfg.learning_rate * gb
                w += vw
                b += vb
            if not all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in params):
                raise NumericalDivergence(f"non-finite parameter in epoch {epoch}, batch at {start}")
    return _unchecked(net, params) if cfg.epochs else net


def _unchecked(net, params):
    # skips the validation in __post_init__; shapes are preserved by construction
    out = object.__new__(NetParams)
    frozen = []
    for w, b in params:
        w2, b2 = w.copy(), b.copy()
        w2.flags.writeable = False
        b2.flags.writeable = False
        frozen.append((w2, b2))
    object.__setattr__(out, "arch", net.arch)
    object.__setattr__(out, "input_shape", net.input_shape)
    object.__setattr__(out, "layers", tuple(frozen))
    return out


def predict_labels(net, X):
    return (predict_proba(net, X) >= 0.5).astype(np.int64)


def accuracy(net, data):
    """Fraction of records whose thresholded prediction equals the label."""
    X, y = _xy(data)
    if len(y) == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict_labels(net, X) == np.asarray(y)))


def _check_relu(net, j):
    if not (0 <= j < len(net.arch)) or not isinstance(net.arch[j], Relu):
        raise BadLayerIndex(f"layer {j} is not a ReLU layer (ReLU layers: {net.relu_indices})")


def activations_batch(net, X, j):
    """Post-ReLU activations after layer ``j`` for a batch, flattened per input."""
    _check_relu(net, j)
    out, _ = _forward(net.arch, net.layers, _as_batch(net, X), stop=j)
    return out.reshape(out.shape[0], -1)


def activations(net, x, j):
    """Post-ReLU activation vector after arch index ``j`` (flattened for conv layers)."""
    x = np.asarray(x, dtype=np.float64)
    if int(np.prod(x.shape)) != int(np.prod(net.input_shape)):
        raise ShapeMismatch(f"input of shape {x.shape} does not match {net.input_shape}")
    return activations_batch(net, x.reshape((1,) + net.input_shape), j)[0]


def to_document(net):
    return {
        "format": NET_FORMAT,
        "input_shape": list(net.input_shape),
        "arch": [_layer_to_json(l) for l in net.arch],
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in net.layers],
    }


def serialize(net):
    """Canonical JSON text. Floats use shortest round-trip repr, so loading is exact."""
    return json.dumps(to_document(net), separators=(",", ":"))


def from_document(doc):
    try:
        if doc.get("format", NET_FORMAT) != NET_FORMAT:
            raise MalformedDocument(f"unsupported format {doc.get('format')!r}")
        arch = tuple(_layer_from_json(l) for l in doc["arch"])
        input_shape = tuple(doc.get("input_shape") or _default_input_shape(arch))
        layers = tuple((np.array(l["w"], dtype=np.float64), np.array(l["b"], dtype=np.float64)) for l in doc["layers"])
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, (MalformedDocument, ShapeMismatch)):
            raise
        raise MalformedDocument(f"bad model document: {exc}") from exc
    return NetParams(arch, input_shape, layers)


def deserialize(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("model document must be a JSON object")
    return from_document(doc)


def save(net, path):
    with open(path, "w") as fh:
        fh.write(serialize(net))


def load(path):
    with open(path) as fh:
        return deserialize(fh.read())
