"""Permutation-invariant meta-classifier over network parameters.

Each parameterized layer of a target network becomes a set of rows:

* dense layer: one row per output neuron, ``[incoming weights, bias]``;
* conv layer: one row per output channel, see :func:`conv_flatten`.

Every row of layer ``i`` is extended with the previous layer's
representation ``L_{i-1}`` (empty for the first layer), standardized per
column, and mapped through a per-layer two-layer ReLU network ``phi_i``.
Summing over rows gives ``L_i``, which is invariant to the order of the
rows. A two-layer ReLU head ``rho`` reads the concatenation of all ``L_i``
and outputs a logit (binary mode) or the predicted ratio (regression mode).

Invariance holds per layer: permuting the rows of any one layer with all
else fixed leaves the output unchanged. Permuting hidden units coherently
across two layers also permutes the columns of the next layer's rows, which
this construction does not undo.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import _seeding
from ..errors import ArchMismatch, MissingLabel, ShapeMismatch
from ..nets import PARAM_LAYERS, Conv2D, Dense
from .pool import ShadowPool


class MetaMode(enum.Enum):
    BINARY = "binary"
    REGRESSION = "regression"


@dataclass(frozen=True)
class MetaConfig:
    latent: int = 16
    rho_hidden: int = 16
    epochs: int = 150
    batch_size: int = 16
    learning_rate: float = 0.003
    momentum: float = 0.9
    weight_decay: float = 1e-4
    grad_clip: float = 5.0
    mode: MetaMode = MetaMode.BINARY
    layers: tuple | None = None  # indices of parameterized layers to use; None = all

    def __post_init__(self):
        object.__setattr__(self, "mode", MetaMode(self.mode))
        if self.layers is not None:
            object.__setattr__(self, "layers", tuple(int(i) for i in self.layers))


def conv_flatten(kernel, bias):
    """Kernel ``(k1, k2, c_in, c_out)`` and bias to a ``(c_out, k1*k2*c_in + 1)`` matrix.

    Row ``j`` is output channel ``j``'s kernel slice in ``(k1, k2, c_in)``
    row-major order followed by ``bias[j]``.
    """
    k = np.asarray(kernel, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if k.ndim != 4 or b.shape != (k.shape[3],):
        raise ShapeMismatch(f"kernel {k.shape} and bias {b.shape} are inconsistent")
    return np.hstack([k.reshape(-1, k.shape[3]).T, b[:, None]])


def dense_rows(weights, bias):
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if w.ndim != 2 or b.shape != (w.shape[0],):
        raise ShapeMismatch(f"weights {w.shape} and bias {b.shape} are inconsistent")
    return np.hstack([w, b[:, None]])


def layer_matrices(net, which=None):
    """Row matrices of the selected parameterized layers of ``net``."""
    out = []
    for i, (spec, (w, b)) in enumerate(zip(net.param_arch, net.layers)):
        if which is not None and i not in which:
            continue
        out.append(conv_flatten(w, b) if isinstance(spec, Conv2D) else dense_rows(w, b))
    return out


@dataclass(frozen=True)
class Phi:
    """Two-layer ReLU map applied to each row: ``relu(W2 relu(W1 r + b1) + b2)``."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def in_width(self):
        return self.w1.shape[1]


def _phi_forward(phi, rows):
    a1 = rows @ phi.w1.T + phi.b1
    z1 = np.maximum(a1, 0.0)
    a2 = z1 @ phi.w2.T + phi.b2
    return np.maximum(a2, 0.0), (rows, a1, z1, a2)


def layer_representation(phi, rows):
    """``L = sum_j phi(row_j)`` over the rows of a matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != phi.in_width:
        raise ShapeMismatch(f"rows of width {rows.shape[-1]} do not match phi input width {phi.in_width}")
    z, _ = _phi_forward(phi, rows)
    return z.sum(axis=0)


@dataclass(frozen=True, eq=False)
class MetaNet:
    phis: tuple
    rho: tuple  # (V1, c1, V2, c2)
    mode: MetaMode
    signature: tuple  # (param layer indices, row widths, row counts)
    col_mean: tuple
    col_std: tuple
    cfg: MetaConfig = field(default_factory=MetaConfig)
    # regression targets are fitted as (alpha - target_shift) / target_scale
    target_shift: float = 0.0
    target_scale: float = 1.0

    @property
    def layer_ids(self):
        return self.signature[0]


def _signature(net, which):
    mats = layer_matrices(net, which)
    ids = tuple(i for i in range(len(net.layers)) if which is None or i in which)
    return ids, tuple(m.shape[1] for m in mats), tuple(m.shape[0] for m in mats)


def _check_signature(meta, net):
    sig = _signature(net, meta.layer_ids)
    if sig != meta.signature:
        raise ArchMismatch(f"network signature {sig} does not match meta-classifier {meta.signature}")


def _uniform(rng, shape, fan_in):
    lim = math.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-lim, lim, shape)


def init_meta(signature, cfg, seed, zero_rho=False):
    """Fresh meta-classifier for networks with the given signature."""
    rng = np.random.default_rng(seed)
    h = cfg.latent
    phis = []
    for k, (width, count) in enumerate(zip(signature[1], signature[2])):
        w_in = width + (h if k else 0)
        # the output layer is scaled by 1/rows so each L_i starts at O(1) whatever the layer width
        w2 = _uniform(rng, (h, h), h) / count
        phis.append(Phi(_uniform(rng, (h, w_in), w_in), np.zeros(h), w2, np.zeros(h)))
    total = h * len(phis)
    r = cfg.rho_hidden
    v1 = _uniform(rng, (r, total), total)
    v2 = _uniform(rng, (1, r), r)
    if zero_rho:
        v1, v2 = np.zeros_like(v1), np.zeros_like(v2)
    rho = (v1, np.zeros(r), v2, np.zeros(1))
    widths = signature[1]
    return MetaNet(
        tuple(phis), rho, cfg.mode, signature,
        tuple(np.zeros(w) for w in widths), tuple(np.ones(w) for w in widths), cfg,
    )


def _stack_rows(nets, layer_ids):
    """Per layer, an array ``(n_models, n_rows, width)``."""
    per_model = [layer_matrices(n, layer_ids) for n in nets]
    return [np.stack([m[k] for m in per_model]) for k in range(len(per_model[0]))]


def _meta_forward(meta, stacked):
    """Forward a batch of models; returns (output logits/values, features, caches)."""
    caches = []
    reps = []
    prev = None
    for k, (phi, rows) in enumerate(zip(meta.phis, stacked)):
        x = (rows - meta.col_mean[k]) / meta.col_std[k]
        if prev is not None:
            ctx = np.broadcast_to(prev[:, None, :], x.shape[:2] + (prev.shape[1],))
            x = np.concatenate([x, ctx], axis=2)
        z, cache = _phi_forward(phi, x)
        prev = z.sum(axis=1)
        reps.append(prev)
        caches.append(cache)
    feats = np.concatenate(reps, axis=1)
    v1, c1, v2, c2 = meta.rho
    u1 = feats @ v1.T + c1
    r1 = np.maximum(u1, 0.0)
    out = (r1 @ v2.T + c2)[:, 0]
    return out, feats, (caches, u1, r1)


def _meta_backward(meta, dout, feats, state):
    """Gradients of a loss w.r.t. all meta parameters given ``d loss / d out``."""
    caches, u1, r1 = state
    v1, c1, v2, c2 = meta.rho
    d2 = dout[:, None]
    g_v2 = d2.T @ r1
    g_c2 = d2.sum(axis=0)
    du1 = (d2 @ v2) * (u1 > 0)
    g_v1 = du1.T @ feats
    g_c1 = du1.sum(axis=0)
    dfeats = du1 @ v1
    h = meta.cfg.latent
    n = len(meta.phis)
    dL = [dfeats[:, k * h : (k + 1) * h].copy() for k in range(n)]
    g_phis = [None] * n
    for k in reversed(range(n)):
        phi = meta.phis[k]
        x, a1, z1, a2 = caches[k]
        dz2 = np.broadcast_to(dL[k][:, None, :], a2.shape)
        da2 = dz2 * (a2 > 0)
        g_w2 = np.einsum("brh,brk->hk", da2, z1)
        g_b2 = da2.sum(axis=(0, 1))
        da1 = (da2 @ phi.w2) * (a1 > 0)
        g_w1 = np.einsum("brh,brk->hk", da1, x)
        g_b1 = da1.sum(axis=(0, 1))
        if k:
            dx = da1 @ phi.w1
            dL[k - 1] += dx[:, :, -h:].sum(axis=1)
        g_phis[k] = (g_w1, g_b1, g_w2, g_b2)
    return g_phis, (g_v1, g_c1, g_v2, g_c2)


def _loss(meta, out, target):
    if meta.mode is MetaMode.BINARY:
        p = 1.0 / (1.0 + np.exp(-out))
        p = np.clip(p, 1e-12, 1 - 1e-12)
        loss = -np.mean(target * np.log(p) + (1 - target) * np.log(1 - p))
        return float(loss), (1.0 / (1.0 + np.exp(-out)) - target) / len(target)
    diff = out - target
    return float(np.mean(diff**2)), 2.0 * diff / len(target)


def meta_loss_and_grads(meta, nets, targets):
    """Loss of ``meta`` on a batch of networks and the gradient per parameter."""
    stacked = _stack_rows(nets, meta.layer_ids)
    out, feats, state = _meta_forward(meta, stacked)
    loss, dout = _loss(meta, out, np.asarray(targets, dtype=float))
    return loss, _meta_backward(meta, dout, feats, state)


def _params(meta):
    return [a for phi in meta.phis for a in (phi.w1, phi.b1, phi.w2, phi.b2)] + list(meta.rho)


def _with_params(meta, flat):
    phis = tuple(Phi(*flat[4 * k : 4 * k + 4]) for k in range(len(meta.phis)))
    return replace(meta, phis=phis, rho=tuple(flat[4 * len(meta.phis) :]))


def _fit_standardization(meta, stacked):
    means, stds = [], []
    for rows in stacked:
        flat = rows.reshape(-1, rows.shape[-1])
        sd = flat.std(axis=0)
        means.append(flat.mean(axis=0))
        stds.append(np.where(sd > 1e-8, sd, 1.0))
    return replace(meta, col_mean=tuple(means), col_std=tuple(stds))


def meta_train(pool, cfg=None, seed=0):
    """Train a meta-classifier on a shadow pool.

    Binary mode fits cross-entropy on ``pool.dist_labels``; regression mode
    fits mean squared error on ``pool.alpha_labels``. Minibatch SGD with
    momentum, deterministic in ``seed``.
    """
    cfg = cfg or MetaConfig()
    if not len(pool):
        raise MissingLabel("empty shadow pool")
    if cfg.mode is MetaMode.BINARY:
        target = pool.labels().astype(float)
        shift, scale = 0.0, 1.0
    else:
        alphas = pool.alphas()
        shift = float(alphas.mean())
        scale = float(alphas.std()) or 1.0
        target = (alphas - shift) / scale
    sig = _signature(pool.models[0], cfg.layers)
    for net in pool.models[1:]:
        if _signature(net, cfg.layers) != sig:
            raise ArchMismatch("shadow models do not share an architecture")
    stacked = _stack_rows(pool.models, sig[0])
    meta = _fit_standardization(init_meta(sig, cfg, seed), stacked)
    meta = replace(meta, target_shift=shift, target_scale=scale)
    params = [p.copy() for p in _params(meta)]
    vel = [np.zeros_like(p) for p in params]
    m = len(target)
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(_seeding.mix(seed, 0x4D455441, epoch)).permutation(m)
        for start in range(0, m, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            cur = _with_params(meta, params)
            out, feats, state = _meta_forward(cur, [s[idx] for s in stacked])
            _, dout = _loss(cur, out, target[idx])
            g_phis, g_rho = _meta_backward(cur, dout, feats, state)
            grads = [g for gp in g_phis for g in gp] + list(g_rho)
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
            scale = min(1.0, cfg.grad_clip / norm) if norm > 0 else 1.0
            for p, v, g in zip(params, vel, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * (scale * g + cfg.weight_decay * p)
                p += v
    return _with_params(meta, params)


def featurize_model(net, meta):
    """Concatenated layer representations ``L_1 .. L_k`` of one network."""
    _check_signature(meta, net)
    _, feats, _ = _meta_forward(meta, _stack_rows([net], meta.layer_ids))
    return feats[0]


def meta_output(meta, nets):
    """Raw outputs for a list of networks: probabilities (binary) or predicted ratios."""
    nets = list(nets)
    for n in nets:
        _check_signature(meta, n)
    out, _, _ = _meta_forward(meta, _stack_rows(nets, meta.layer_ids))
    if meta.mode is MetaMode.BINARY:
        return 1.0 / (1.0 + np.exp(-out))
    return out * meta.target_scale + meta.target_shift


def meta_predict(meta, target):
    """Probability of ``b = 1`` (binary mode) or the predicted ratio (regression, unclamped)."""
    return float(meta_output(meta, [target])[0])


def meta_predict_bit(meta, target):
    return int(meta_predict(meta, target) >= 0.5)


def regression_baseline_mse(alpha_grid):
    """MSE of the best constant guess against a uniform draw from ``alpha_grid``."""
    a = np.asarray(alpha_grid, dtype=float)
    return float(np.mean((a - a.mean()) ** 2))

