"""Dense ReLU networks on a flat float64 parameter vector.

Parameters are stored layer by layer as ``W`` (``fan_in x fan_out``, row-major)
followed by ``b`` (``fan_out``).  Forward passes accept a single input vector
or a batch of row vectors; ``backward`` sums parameter gradients over the
batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = "trac-checkpoint"


class GradientOverflowError(FloatingPointError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    dropout_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("an MLP needs at least input and output layers")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive: {self.layer_sizes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))

    def shapes(self):
        sizes = self.layer_sizes
        return list(zip(sizes[:-1], sizes[1:]))


def unpack(spec: MlpSpec, params: np.ndarray):
    """Views ``[(W, b), ...]`` into ``params``; no copies."""
    if params.shape != (spec.n_params,):
        raise ValueError(f"parameter vector has shape {params.shape}, spec needs ({spec.n_params},)")
    layers, off = [], 0
    for fan_in, fan_out in spec.shapes():
        w = params[off : off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = params[off : off + fan_out]
        off += fan_out
        layers.append((w, b))
    return layers


def init_params(spec: MlpSpec, seed: int) -> np.ndarray:
    """Zero-mean normal weights with variance 1/fan_in; zero biases."""
    rng = np.random.default_rng(seed)
    params = np.zeros(spec.n_params)
    for w, _ in unpack(spec, params):
        w[...] = rng.standard_normal(w.shape) / np.sqrt(w.shape[0])
    return params


@dataclass
class ForwardCache:
    inputs: list  # input to each layer
    pre: list  # pre-activations of hidden layers
    masks: list  # dropout scale masks per hidden layer (None when off)
    squeeze: bool = field(default=False)


def forward(spec: MlpSpec, params: np.ndarray, x, rng: np.random.Generator | None = None):
    """Run the network; returns ``(output, cache)``.

    Passing ``rng`` turns on inverted dropout after every hidden activation.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != spec.layer_sizes[0]:
        raise ValueError(f"input has dimension {x.shape[1]}, network expects {spec.layer_sizes[0]}")
    layers = unpack(spec, params)
    keep = 1.0 - spec.dropout_rate
    cache = ForwardCache([], [], [], squeeze)
    h = x
    for i, (w, b) in enumerate(layers):
        cache.inputs.append(h)
        z = h @ w + b
        if i == len(layers) - 1:
            h = z
            break
        cache.pre.append(z)
        h = np.maximum(z, 0.0)
        if rng is not None and spec.dropout_rate > 0:
            mask = (rng.random(h.shape, dtype=np.float32) < keep) / keep
            h = h * mask
            cache.masks.append(mask)
        else:
            cache.masks.append(None)
    return (h[0] if squeeze else h), cache


def backward(spec: MlpSpec, params: np.ndarray, cache: ForwardCache, grad_out) -> np.ndarray:
    """Gradient of ``sum(grad_out * output)`` with respect to ``params``."""
    g = np.asarray(grad_out, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    layers = unpack(spec, params)
    n_rows = cache.inputs[0].shape[0]
    if len(cache.inputs) != len(layers) or g.shape != (n_rows, spec.layer_sizes[-1]):
        raise ValueError("forward cache does not match this network or output gradient")
    grads = np.zeros_like(params)
    grad_layers = unpack(spec, grads)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw, gb = grad_layers[i]
        gw[...] = cache.inputs[i].T @ g
        gb[...] = g.sum(axis=0)
        if i == 0:
            break
        g = g @ w.T
        if cache.masks[i - 1] is not None:
            g = g * cache.masks[i - 1]
        g = g * (cache.pre[i - 1] > 0)
    return grads


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError("params, grads and optimizer state must share a shape")
    if not np.all(np.isfinite(grads)):
        raise GradientOverflowError("gradient overflow")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, t, state.beta1, state.beta2, state.eps)


def save_checkpoint(path, spec: MlpSpec, params: np.ndarray, step: int = 0, lineage: dict | None = None) -> None:
    """JSON header line followed by raw little-endian float64 parameters."""
    header = {
        "magic": CHECKPOINT_MAGIC,
        "format_version": 1,
        "layer_sizes": list(spec.layer_sizes),
        "dropout_rate": spec.dropout_rate,
        "n_params": spec.n_params,
        "step": step,
        "lineage": lineage or {},
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(params, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns ``(spec, params, header)``."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        if header.get("magic") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint")
        spec = MlpSpec(tuple(header["layer_sizes"]), header["dropout_rate"])
        raw = fh.read()
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if params.shape != (spec.n_params,):
        raise ValueError(f"{path}: expected {spec.n_params} parameters, found {params.size}")
    return spec, params, header
