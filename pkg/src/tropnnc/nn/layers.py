"""Dense layer types, the ``Network`` container and batched forward evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tropnnc.errors import ShapeError, UnsupportedTopologyError


def _tensor(x, name: str, ndim: int) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class Linear:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    kind = "linear"

    def __post_init__(self):
        w = _tensor(self.weight, "weight", 2)
        b = _tensor(self.bias, "bias", 1)
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"bias length {b.shape[0]} != {w.shape[0]} outputs")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def output_shape(self, shape: tuple) -> tuple:
        if shape != (self.in_features,):
            raise ShapeError(f"linear layer expects ({self.in_features},), got {shape}")
        return (self.out_features,)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T + self.bias


@dataclass(frozen=True, eq=False)
class Conv2d:
    kernel: np.ndarray  # (outC, inC, kH, kW)
    bias: np.ndarray  # (outC,)
    stride: int = 1
    padding: int = 0
    kind = "conv2d"

    def __post_init__(self):
        k = _tensor(self.kernel, "kernel", 4)
        b = _tensor(self.bias, "bias", 1)
        if b.shape[0] != k.shape[0]:
            raise ShapeError(f"bias length {b.shape[0]} != {k.shape[0]} output channels")
        if int(self.stride) < 1 or int(self.padding) < 0:
            raise ShapeError("stride must be >= 1 and padding >= 0")
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "stride", int(self.stride))
        object.__setattr__(self, "padding", int(self.padding))

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    def output_shape(self, shape: tuple) -> tuple:
        if len(shape) != 3 or shape[0] != self.in_channels:
            raise ShapeError(f"conv layer expects ({self.in_channels}, H, W), got {shape}")
        kh, kw = self.kernel.shape[2:]
        oh = (shape[1] + 2 * self.padding - kh) // self.stride + 1
        ow = (shape[2] + 2 * self.padding - kw) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"kernel {kh}x{kw} does not fit input {shape}")
        return (self.out_channels, oh, ow)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        p, s = self.padding, self.stride
        if p:
            x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        kh, kw = self.kernel.shape[2:]
        win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
        out = np.einsum("nchwij,ocij->nohw", win, self.kernel, optimize=True)
        return out + self.bias[None, :, None, None]


@dataclass(frozen=True)
class ReLU:
    kind = "relu"

    def output_shape(self, shape: tuple) -> tuple:
        return shape

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0)


@dataclass(frozen=True)
class _Pool:
    size: int
    stride: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "size", int(self.size))
        stride = self.size if self.stride is None else int(self.stride)
        if self.size < 1 or stride < 1:
            raise ShapeError("pool size and stride must be positive")
        object.__setattr__(self, "stride", stride)

    def output_shape(self, shape: tuple) -> tuple:
        if len(shape) != 3:
            raise ShapeError(f"pooling expects (C, H, W), got {shape}")
        oh = (shape[1] - self.size) // self.stride + 1
        ow = (shape[2] - self.size) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"pool window {self.size} does not fit input {shape}")
        return (shape[0], oh, ow)

    def _windows(self, x: np.ndarray) -> np.ndarray:
        win = sliding_window_view(x, (self.size, self.size), axis=(2, 3))
        return win[:, :, :: self.stride, :: self.stride]


@dataclass(frozen=True)
class MaxPool(_Pool):
    kind = "maxpool"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self._windows(x).max(axis=(-2, -1))


@dataclass(frozen=True)
class AvgPool(_Pool):
    kind = "avgpool"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self._windows(x).mean(axis=(-2, -1))


@dataclass(frozen=True, eq=False)
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    kind = "batchnorm"

    def __post_init__(self):
        names = ("gamma", "beta", "running_mean", "running_var")
        arrs = [_tensor(getattr(self, n), n, 1) for n in names]
        if len({a.shape for a in arrs}) != 1:
            raise ShapeError("batch-norm parameters differ in length")
        if np.any(arrs[3] < 0):
            raise ShapeError("running_var must be nonnegative")
        eps = float(self.eps)
        # eps = 0 is accepted as long as the denominator stays positive
        if eps < 0 or np.any(arrs[3] + eps <= 0):
            raise ShapeError("running_var + eps must be positive")
        for n, a in zip(names, arrs):
            object.__setattr__(self, n, a)
        object.__setattr__(self, "eps", eps)

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    def scale_shift(self) -> tuple[np.ndarray, np.ndarray]:
        scale = self.gamma / np.sqrt(self.running_var + self.eps)
        return scale, self.beta - scale * self.running_mean

    def output_shape(self, shape: tuple) -> tuple:
        if shape[0] != self.channels:
            raise ShapeError(f"batch-norm has {self.channels} channels, input {shape}")
        return shape

    def __call__(self, x: np.ndarray) -> np.ndarray:
        scale, shift = self.scale_shift()
        extra = (1,) * (x.ndim - 2)
        return x * scale.reshape(-1, *extra) + shift.reshape(-1, *extra)


@dataclass(frozen=True)
class Flatten:
    kind = "flatten"

    def output_shape(self, shape: tuple) -> tuple:
        return (prod(shape),)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(x.shape[0], -1)


Layer = Linear | Conv2d | ReLU | MaxPool | AvgPool | BatchNorm | Flatten
PARAMETRIC = (Linear, Conv2d)


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple
    input_shape: tuple
    shapes: tuple = field(init=False, repr=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        in_shape = tuple(int(s) for s in np.atleast_1d(self.input_shape))
        if not in_shape or any(s < 1 for s in in_shape):
            raise ShapeError(f"bad input shape {in_shape}")
        if sum(isinstance(l, Flatten) for l in layers) > 1:
            raise UnsupportedTopologyError("at most one flatten layer is supported")
        shapes = [in_shape]
        for i, layer in enumerate(layers):
            if isinstance(layer, BatchNorm) and (i == 0 or not isinstance(layers[i - 1], PARAMETRIC)):
                raise UnsupportedTopologyError(f"batch-norm at position {i} does not follow linear/conv")
            shapes.append(layer.output_shape(shapes[-1]))
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_shape", in_shape)
        object.__setattr__(self, "shapes", tuple(shapes))

    @property
    def output_shape(self) -> tuple:
        return self.shapes[-1]

    def parametric_indices(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if isinstance(l, PARAMETRIC)]

    def replace(self, layers) -> "Network":
        return Network(tuple(layers), self.input_shape)


def forward(net: Network, x) -> np.ndarray:
    """Evaluate one sample shaped ``input_shape`` or a batch ``(N, *input_shape)``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == net.input_shape
    if single:
        x = x[None]
    elif x.shape[1:] != net.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match {net.input_shape}")
    for layer in net.layers:
        x = layer(x)
    return x[0] if single else x
