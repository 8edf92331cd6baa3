"""Tiny float64 neural-network engine: dense and 1-D conv layers, ReLU,
flatten, reverse-mode gradients and Adam.

Tensors are plain ``numpy`` arrays with a leading batch axis.  Dense layers
consume ``(N, features)``; conv layers are channels-last, ``(N, length,
channels)``, so a lidar scan enters as ``(N, 108, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when an input does not match what a layer expects."""


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int

    def __post_init__(self):
        if self.in_features < 1 or self.out_features < 1:
            raise ValueError(f"Dense dims must be >= 1, got {self}")


@dataclass(frozen=True)
class Conv1D:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.kernel, self.stride) < 1:
            raise ValueError(f"Conv1D dims must be >= 1, got {self}")
        if self.padding < 0:
            raise ValueError("Conv1D padding must be >= 0")

    def out_length(self, in_length: int) -> int:
        n = (in_length + 2 * self.padding - self.kernel) // self.stride + 1
        if n < 1:
            raise ShapeError(f"{self} produces empty output for length {in_length}")
        return n


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


Layer = Union[Dense, Conv1D, ReLU, Flatten]


def has_params(layer: Layer) -> bool:
    return isinstance(layer, (Dense, Conv1D))


def param_shapes(layer: Layer) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    if isinstance(layer, Dense):
        return (layer.in_features, layer.out_features), (layer.out_features,)
    if isinstance(layer, Conv1D):
        return (layer.kernel * layer.in_channels, layer.out_channels), (layer.out_channels,)
    return None


def init_params(layers: Sequence[Layer], rng: np.random.Generator) -> list[dict[str, np.ndarray]]:
    """He-uniform weights (fan-in scaled), zero biases.  One dict per layer;
    parameter-free layers get an empty dict."""
    params = []
    for layer in layers:
        shapes = param_shapes(layer)
        if shapes is None:
            params.append({})
            continue
        w_shape, b_shape = shapes
        fan_in = w_shape[0]
        bound = np.sqrt(6.0 / fan_in)
        params.append({
            "W": rng.uniform(-bound, bound, size=w_shape).astype(DTYPE),
            "b": np.zeros(b_shape, dtype=DTYPE),
        })
    return params


def zeros_like_params(params: list[dict[str, np.ndarray]]) -> list[dict[str, np.ndarray]]:
    return [{k: np.zeros_like(v) for k, v in p.items()} for p in params]


def _check_input(i: int, layer: Layer, x: np.ndarray) -> None:
    if isinstance(layer, Dense):
        if x.ndim != 2 or x.shape[1] != layer.in_features:
            raise ShapeError(f"layer {i} ({layer}) expects (N, {layer.in_features}), got {x.shape}")
    elif isinstance(layer, Conv1D):
        if x.ndim != 3 or x.shape[2] != layer.in_channels:
            raise ShapeError(f"layer {i} ({layer}) expects (N, L, {layer.in_channels}), got {x.shape}")


def forward(params, layers: Sequence[Layer], x: np.ndarray):
    """Run ``x`` through ``layers``.  Returns ``(output, cache)``; the cache
    holds each layer's input (and im2col buffers for conv layers)."""
    if len(params) != len(layers):
        raise ShapeError(f"{len(params)} parameter groups for {len(layers)} layers")
    x = np.asarray(x, dtype=DTYPE)
    cache = []
    for i, (layer, p) in enumerate(zip(layers, params)):
        _check_input(i, layer, x)
        if isinstance(layer, Dense):
            cache.append(x)
            x = x @ p["W"] + p["b"]
        elif isinstance(layer, Conv1D):
            pad, s = layer.padding, layer.stride
            n_out = layer.out_length(x.shape[1])
            xp = np.pad(x, ((0, 0), (pad, pad), (0, 0))) if pad else x
            # im2col: (N, L_out, K*C), tap-major
            cols = np.concatenate([xp[:, k:k + s * n_out:s, :] for k in range(layer.kernel)], axis=2)
            cache.append((x.shape, cols))
            x = cols @ p["W"] + p["b"]
        elif isinstance(layer, ReLU):
            cache.append(x)
            x = np.maximum(x, 0.0)
        elif isinstance(layer, Flatten):
            cache.append(x.shape)
            x = x.reshape(x.shape[0], -1)
        else:
            raise TypeError(f"unknown layer {layer!r}")
    return x, cache


def backward(params, layers: Sequence[Layer], cache, grad_out: np.ndarray):
    """Reverse pass.  Returns ``(param_grads, input_grad)``; parameter
    gradients are summed over the batch."""
    grads = zeros_like_params(params)
    g = np.asarray(grad_out, dtype=DTYPE)
    for i in range(len(layers) - 1, -1, -1):
        layer, p, c = layers[i], params[i], cache[i]
        if isinstance(layer, Dense):
            if g.shape != (c.shape[0], layer.out_features):
                raise ShapeError(f"layer {i} ({layer}) got output grad {g.shape}")
            grads[i]["W"] = c.T @ g
            grads[i]["b"] = g.sum(axis=0)
            g = g @ p["W"].T
        elif isinstance(layer, Conv1D):
            in_shape, cols = c
            n, length, ch = in_shape
            if g.ndim != 3 or g.shape[0] != n or g.shape[2] != layer.out_channels:
                raise ShapeError(f"layer {i} ({layer}) got output grad {g.shape}")
            n_out = g.shape[1]
            gflat = g.reshape(-1, layer.out_channels)
            grads[i]["W"] = cols.reshape(gflat.shape[0], -1).T @ gflat
            grads[i]["b"] = gflat.sum(axis=0)
            dcols = g @ p["W"].T
            pad, s = layer.padding, layer.stride
            dxp = np.zeros((n, length + 2 * pad, ch), dtype=DTYPE)
            for k in range(layer.kernel):
                dxp[:, k:k + s * n_out:s, :] += dcols[:, :, k * ch:(k + 1) * ch]
            g = dxp[:, pad:pad + length, :]
        elif isinstance(layer, ReLU):
            g = g * (c > 0.0)
        elif isinstance(layer, Flatten):
            g = g.reshape(c)
    return grads, g


@dataclass
class AdamState:
    """Adam moments mirror the parameter list; ``t`` counts applied steps."""

    m: list[dict[str, np.ndarray]]
    v: list[dict[str, np.ndarray]]
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_params(cls, params, lr: float = 1e-5, **kw) -> "AdamState":
        if lr < 0:
            raise ValueError("lr must be >= 0")
        return cls(m=zeros_like_params(params), v=zeros_like_params(params), lr=lr, **kw)


def adam_step(params, grads, state: AdamState) -> None:
    """In-place Adam update of ``params`` and ``state``."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        for k in p:
            m[k] *= b1
            m[k] += (1.0 - b1) * g[k]
            v[k] *= b2
            v[k] += (1.0 - b2) * g[k] * g[k]
            p[k] -= state.lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps)


@dataclass
class Sequential:
    """A layer chain bundled with its parameters."""

    layers: list
    params: list = field(default_factory=list)

    @classmethod
    def build(cls, layers, rng: np.random.Generator) -> "Sequential":
        return cls(list(layers), init_params(layers, rng))

    def forward(self, x):
        return forward(self.params, self.layers, x)

    def backward(self, cache, grad_out):
        return backward(self.params, self.layers, cache, grad_out)

    def copy(self) -> "Sequential":
        return Sequential(list(self.layers), [{k: v.copy() for k, v in p.items()} for p in self.params])
