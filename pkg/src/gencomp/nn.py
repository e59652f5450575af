"""Minimal sequential neural-network engine with reverse-mode gradients.

Arrays are plain ``numpy.ndarray`` in float64, laid out NCHW for images
and (N, features) for vectors. A :class:`Network` is an ordered stack of
layers built from :class:`LayerSpec` values; ``forward`` records what each
layer needs and ``backward`` replays it in reverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LAYER_KINDS = (
    "dense",
    "conv2d",
    "deconv2d",
    "relu",
    "leaky_relu",
    "tanh",
    "sigmoid",
    "batch_norm",
    "reshape",
)

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
INIT_STD = 0.02


class ShapeError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a sequential network.

    ``in_size``/``out_size`` are features for dense layers and channels for
    convolutions and batch norm. ``shape`` is the per-sample target of a
    reshape layer.
    """

    kind: str
    in_size: int = 0
    out_size: int = 0
    kernel: int = 4
    stride: int = 2
    padding: int = 1
    alpha: float = 0.2
    shape: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv2d", "deconv2d"):
            if self.kernel <= 0 or self.stride <= 0 or self.padding < 0:
                raise ValueError("kernel and stride must be positive")
        if self.kind in ("dense", "conv2d", "deconv2d") and (
            self.in_size <= 0 or self.out_size <= 0
        ):
            raise ValueError(f"{self.kind} needs positive in/out sizes")

    def to_text(self) -> str:
        k = self.kind
        if k == "dense":
            return f"dense:{self.in_size},{self.out_size}"
        if k in ("conv2d", "deconv2d"):
            return f"{k}:{self.in_size},{self.out_size},{self.kernel},{self.stride},{self.padding}"
        if k == "leaky_relu":
            return f"leaky_relu:{self.alpha!r}"
        if k == "batch_norm":
            return f"batch_norm:{self.in_size}"
        if k == "reshape":
            return "reshape:" + ",".join(str(d) for d in self.shape)
        return k

    @classmethod
    def from_text(cls, text: str) -> "LayerSpec":
        kind, _, args = text.strip().partition(":")
        vals = [a for a in args.split(",") if a]
        if kind == "dense":
            return dense(int(vals[0]), int(vals[1]))
        if kind in ("conv2d", "deconv2d"):
            i, o, k, s, p = (int(v) for v in vals)
            return cls(kind, i, o, k, s, p)
        if kind == "leaky_relu":
            return leaky_relu(float(vals[0]))
        if kind == "batch_norm":
            return batch_norm(int(vals[0]))
        if kind == "reshape":
            return reshape(tuple(int(v) for v in vals))
        return cls(kind)


def dense(n_in: int, n_out: int) -> LayerSpec:
    return LayerSpec("dense", n_in, n_out)


def conv2d(c_in, c_out, kernel=4, stride=2, padding=1) -> LayerSpec:
    return LayerSpec("conv2d", c_in, c_out, kernel, stride, padding)


def deconv2d(c_in, c_out, kernel=4, stride=2, padding=1) -> LayerSpec:
    return LayerSpec("deconv2d", c_in, c_out, kernel, stride, padding)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def leaky_relu(alpha: float = 0.2) -> LayerSpec:
    return LayerSpec("leaky_relu", alpha=alpha)


def tanh() -> LayerSpec:
    return LayerSpec("tanh")


def sigmoid() -> LayerSpec:
    return LayerSpec("sigmoid")


def batch_norm(channels: int) -> LayerSpec:
    return LayerSpec("batch_norm", channels, channels)


def reshape(shape: Sequence[int]) -> LayerSpec:
    return LayerSpec("reshape", shape=tuple(int(d) for d in shape))


# --------------------------------------------------------------------------
# shape inference


def output_shape(spec: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Per-sample output shape of ``spec`` applied to ``in_shape``."""
    k = spec.kind
    if k == "dense":
        if in_shape != (spec.in_size,):
            raise ShapeError(f"dense expects ({spec.in_size},), got {in_shape}")
        return (spec.out_size,)
    if k in ("conv2d", "deconv2d"):
        if len(in_shape) != 3 or in_shape[0] != spec.in_size:
            raise ShapeError(f"{k} expects ({spec.in_size}, H, W), got {in_shape}")
        _, h, w = in_shape
        if k == "conv2d":
            ho = (h + 2 * spec.padding - spec.kernel) // spec.stride + 1
            wo = (w + 2 * spec.padding - spec.kernel) // spec.stride + 1
        else:
            ho = (h - 1) * spec.stride + spec.kernel - 2 * spec.padding
            wo = (w - 1) * spec.stride + spec.kernel - 2 * spec.padding
        if ho <= 0 or wo <= 0:
            raise ShapeError(f"{k} produces empty output from {in_shape}")
        return (spec.out_size, ho, wo)
    if k == "batch_norm":
        if len(in_shape) not in (1, 3) or in_shape[0] != spec.in_size:
            raise ShapeError(f"batch_norm({spec.in_size}) got {in_shape}")
        return in_shape
    if k == "reshape":
        if int(np.prod(spec.shape)) != int(np.prod(in_shape)):
            raise ShapeError(f"cannot reshape {in_shape} to {spec.shape}")
        return spec.shape
    return in_shape


# --------------------------------------------------------------------------
# convolution helpers


def _im2col(xt: np.ndarray, k: int, s: int, ho: int, wo: int) -> np.ndarray:
    """Gather a (C, N, Hp, Wp) array into columns of shape (k*k*C, N*ho*wo).

    Row order is (ki, kj, c); column order is (n, i, j).
    """
    c, n = xt.shape[:2]
    cols = np.empty((k, k, c, n, ho, wo))
    for i in range(k):
        for j in range(k):
            cols[i, j] = xt[:, :, i : i + s * ho : s, j : j + s * wo : s]
    return cols.reshape(k * k * c, n * ho * wo)


def _col2im(cols: np.ndarray, c, n, ho, wo, k, s, hp, wp) -> np.ndarray:
    """Scatter-add the inverse of :func:`_im2col` into a (C, N, hp, wp) array."""
    cols = cols.reshape(k, k, c, n, ho, wo)
    out = np.zeros((c, n, hp, wp))
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + s * ho : s, j : j + s * wo : s] += cols[i, j]
    return out


def _pad_cn(x: np.ndarray, p: int) -> np.ndarray:
    """NCHW -> padded CNHW."""
    xt = x.transpose(1, 0, 2, 3)
    return np.pad(xt, ((0, 0), (0, 0), (p, p), (p, p))) if p else np.ascontiguousarray(xt)


# --------------------------------------------------------------------------
# layers


def _normal(rng, std, shape):
    return np.zeros(shape) if rng is None else rng.normal(0.0, std, shape)


class Layer:
    spec: LayerSpec
    param_names: tuple[str, ...] = ()

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def forward(self, x, train):  # -> (y, cache)
        raise NotImplementedError

    def backward(self, cache, grad):  # -> (dx, {name: dparam})
        raise NotImplementedError


class Dense(Layer):
    param_names = ("weight", "bias")

    def init(self, rng, std):
        s = self.spec
        self.params = {
            "weight": _normal(rng, std, (s.out_size, s.in_size)),
            "bias": np.zeros(s.out_size),
        }

    def forward(self, x, train):
        return x @ self.params["weight"].T + self.params["bias"], x

    def backward(self, x, grad):
        w = self.params["weight"]
        return grad @ w, {"weight": grad.T @ x, "bias": grad.sum(axis=0)}


class Conv2d(Layer):
    param_names = ("weight", "bias")

    def init(self, rng, std):
        s = self.spec
        self.params = {
            "weight": _normal(rng, std, (s.out_size, s.in_size, s.kernel, s.kernel)),
            "bias": np.zeros(s.out_size),
        }

    def _wmat(self):
        # (o, c, k, k) -> (o, k*k*c) matching the im2col row order
        return self.params["weight"].transpose(0, 2, 3, 1).reshape(self.spec.out_size, -1)

    def forward(self, x, train):
        s = self.spec
        n, c, h, w = x.shape
        p, k, st = s.padding, s.kernel, s.stride
        ho = (h + 2 * p - k) // st + 1
        wo = (w + 2 * p - k) // st + 1
        cols = _im2col(_pad_cn(x, p), k, st, ho, wo)
        y = self._wmat() @ cols + self.params["bias"][:, None]
        y = y.reshape(s.out_size, n, ho, wo).transpose(1, 0, 2, 3)
        return y, (cols, x.shape, ho, wo)

    def backward(self, cache, grad):
        s = self.spec
        cols, (n, c, h, w), ho, wo = cache
        p, k, st = s.padding, s.kernel, s.stride
        g2 = grad.transpose(1, 0, 2, 3).reshape(s.out_size, -1)
        dw = (g2 @ cols.T).reshape(s.out_size, k, k, c).transpose(0, 3, 1, 2)
        dxp = _col2im(self._wmat().T @ g2, c, n, ho, wo, k, st, h + 2 * p, w + 2 * p)
        dx = dxp[:, :, p : p + h, p : p + w].transpose(1, 0, 2, 3)
        return dx, {"weight": dw, "bias": g2.sum(axis=1)}


class Deconv2d(Layer):
    """Transposed convolution; weight shape is (in, out, k, k)."""

    param_names = ("weight", "bias")

    def init(self, rng, std):
        s = self.spec
        self.params = {
            "weight": _normal(rng, std, (s.in_size, s.out_size, s.kernel, s.kernel)),
            "bias": np.zeros(s.out_size),
        }

    def _wmat(self):
        # (ci, co, k, k) -> (k*k*co, ci)
        s = self.spec
        return self.params["weight"].transpose(2, 3, 1, 0).reshape(-1, s.in_size)

    def forward(self, x, train):
        s = self.spec
        n, c, h, w = x.shape
        p, k, st = s.padding, s.kernel, s.stride
        xm = x.transpose(1, 0, 2, 3).reshape(c, -1)
        hp, wp = (h - 1) * st + k, (w - 1) * st + k
        yp = _col2im(self._wmat() @ xm, s.out_size, n, h, w, k, st, hp, wp)
        y = yp[:, :, p : hp - p, p : wp - p] + self.params["bias"][:, None, None, None]
        return y.transpose(1, 0, 2, 3), (xm, x.shape)

    def backward(self, cache, grad):
        s = self.spec
        xm, (n, c, h, w) = cache
        p, k, st = s.padding, s.kernel, s.stride
        gcols = _im2col(_pad_cn(grad, p), k, st, h, w)
        dx = (self._wmat().T @ gcols).reshape(c, n, h, w).transpose(1, 0, 2, 3)
        dw = (gcols @ xm.T).reshape(k, k, s.out_size, c).transpose(3, 2, 0, 1)
        return dx, {"weight": dw, "bias": grad.sum(axis=(0, 2, 3))}


class ReLU(Layer):
    def forward(self, x, train):
        mask = x > 0
        return x * mask, mask

    def backward(self, mask, grad):
        return grad * mask, {}


class LeakyReLU(Layer):
    def forward(self, x, train):
        slope = np.where(x > 0, 1.0, self.spec.alpha)
        return x * slope, slope

    def backward(self, slope, grad):
        return grad * slope, {}


class Tanh(Layer):
    def forward(self, x, train):
        y = np.tanh(x)
        return y, y

    def backward(self, y, grad):
        return grad * (1.0 - y * y), {}


class Sigmoid(Layer):
    def forward(self, x, train):
        # split by sign so exp never overflows
        e = np.exp(-np.abs(x))
        y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return y, y

    def backward(self, y, grad):
        return grad * y * (1.0 - y), {}


class BatchNorm(Layer):
    """Per-channel normalization over batch (and spatial) axes."""

    param_names = ("gamma", "beta")

    def init(self, rng, std):
        c = self.spec.in_size
        self.params = {"gamma": np.ones(c), "beta": np.zeros(c)}
        self.buffers = {"running_mean": np.zeros(c), "running_var": np.ones(c)}

    @staticmethod
    def _axes(x):
        return (0,) if x.ndim == 2 else (0, 2, 3)

    @staticmethod
    def _bcast(v, x):
        return v if x.ndim == 2 else v[None, :, None, None]

    def forward(self, x, train):
        axes = self._axes(x)
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = BN_MOMENTUM
            self.buffers["running_mean"] = m * self.buffers["running_mean"] + (1 - m) * mean
            self.buffers["running_var"] = m * self.buffers["running_var"] + (1 - m) * var
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - self._bcast(mean, x)) * self._bcast(inv, x)
        y = xhat * self._bcast(self.params["gamma"], x) + self._bcast(self.params["beta"], x)
        return y, (xhat, inv, train)

    def backward(self, cache, grad):
        xhat, inv, train = cache
        axes = self._axes(grad)
        b = lambda v: self._bcast(v, grad)  # noqa: E731
        dgamma = (grad * xhat).sum(axis=axes)
        dbeta = grad.sum(axis=axes)
        dxhat = grad * b(self.params["gamma"])
        if not train:
            return dxhat * b(inv), {"gamma": dgamma, "beta": dbeta}
        m = grad.size // grad.shape[1]
        dx = b(inv) / m * (
            m * dxhat - b(dxhat.sum(axis=axes)) - xhat * b((dxhat * xhat).sum(axis=axes))
        )
        return dx, {"gamma": dgamma, "beta": dbeta}


class Reshape(Layer):
    def forward(self, x, train):
        return x.reshape((x.shape[0],) + self.spec.shape), x.shape

    def backward(self, shape, grad):
        return grad.reshape(shape), {}


_LAYER_TYPES = {
    "dense": Dense,
    "conv2d": Conv2d,
    "deconv2d": Deconv2d,
    "relu": ReLU,
    "leaky_relu": LeakyReLU,
    "tanh": Tanh,
    "sigmoid": Sigmoid,
    "batch_norm": BatchNorm,
    "reshape": Reshape,
}


# --------------------------------------------------------------------------
# network


class Network:
    """A sequential stack of layers with per-sample ``input_shape``."""

    def __init__(self, specs: Sequence[LayerSpec], input_shape: Sequence[int], seed: int = 0):
        self.specs = list(specs)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.seed = int(seed)
        self.layers = [_LAYER_TYPES[s.kind](s) for s in self.specs]
        for layer in self.layers:
            if hasattr(layer, "init"):
                layer.init(None, 0.0)
        shape = self.input_shape
        for s in self.specs:
            shape = output_shape(s, shape)
        self.output_shape = shape
        self._caches = None

    # parameters are exposed in declaration order: layer by layer, then
    # by param_names, then buffers
    def parameters(self) -> list[np.ndarray]:
        return [layer.params[name] for layer in self.layers for name in layer.param_names]

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name in layer.param_names:
                out.append((f"{i}.{name}", layer.params[name]))
            for name in sorted(layer.buffers):
                out.append((f"{i}.{name}", layer.buffers[name]))
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for key, _ in self.named_tensors():
            if key not in tensors:
                raise KeyError(f"missing tensor {key}")
        for i, layer in enumerate(self.layers):
            for name in layer.param_names:
                layer.params[name] = self._match(layer.params[name], tensors[f"{i}.{name}"], f"{i}.{name}")
            for name in layer.buffers:
                layer.buffers[name] = self._match(layer.buffers[name], tensors[f"{i}.{name}"], f"{i}.{name}")

    @staticmethod
    def _match(old, new, key):
        new = np.asarray(new, dtype=np.float64)
        if new.shape != old.shape:
            raise ShapeError(f"tensor {key}: expected {old.shape}, got {new.shape}")
        return new.copy()

    def copy(self) -> "Network":
        other = Network(self.specs, self.input_shape, self.seed)
        other.load_tensors(dict(self.named_tensors()))
        return other

    def forward(self, x: np.ndarray, train: bool = False, record: bool = True) -> np.ndarray:
        """Apply the network to a batch; shape is (N,) + input_shape."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"expected (N, {self.input_shape}), got {x.shape}")
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train)
            caches.append(cache)
        if not np.all(np.isfinite(x)):
            raise DivergenceError("non-finite network output")
        self._caches = caches if record else None
        return x

    __call__ = forward

    def backward(self, output_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients for the most recent recorded ``forward`` call.

        Returns ``(param_grads, input_grad)`` with ``param_grads`` aligned
        with :meth:`parameters`.
        """
        if self._caches is None:
            raise RuntimeError("backward called without a recorded forward pass")
        grad = np.asarray(output_grad, dtype=np.float64)
        per_layer = []
        for layer, cache in zip(reversed(self.layers), reversed(self._caches)):
            grad, pg = layer.backward(cache, grad)
            per_layer.append(pg)
        per_layer.reverse()
        grads = [pg[name] for layer, pg in zip(self.layers, per_layer) for name in layer.param_names]
        return grads, grad


def init_network(specs: Sequence[LayerSpec], input_shape: Sequence[int], seed: int,
                 std: float = INIT_STD) -> Network:
    """Build a network with N(0, std) weights and zero biases, reproducible from ``seed``."""
    net = Network(specs, input_shape, seed)
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        if hasattr(layer, "init"):
            layer.init(rng, std)
    return net


# --------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
