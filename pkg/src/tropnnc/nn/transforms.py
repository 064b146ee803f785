"""Batch-norm fusion, conv/matrix reshaping and size accounting."""

from __future__ import annotations

from math import prod

import numpy as np

from tropnnc.errors import ShapeError, UnsupportedTopologyError
from tropnnc.nn.layers import BatchNorm, Conv2d, Linear, Network


def fuse_pair(layer: Linear | Conv2d, bn: BatchNorm) -> Linear | Conv2d:
    scale, shift = bn.scale_shift()
    if isinstance(layer, Linear):
        if layer.out_features != bn.channels:
            raise ShapeError("batch-norm width differs from the linear layer")
        return Linear(layer.weight * scale[:, None], scale * layer.bias + shift)
    if isinstance(layer, Conv2d):
        if layer.out_channels != bn.channels:
            raise ShapeError("batch-norm width differs from the conv layer")
        kernel = layer.kernel * scale[:, None, None, None]
        return Conv2d(kernel, scale * layer.bias + shift, layer.stride, layer.padding)
    raise UnsupportedTopologyError(f"cannot fuse batch-norm into {type(layer).__name__}")


def fuse_batchnorm(net: Network, only: set[int] | None = None) -> Network:
    """Fold every batch-norm (or those right after the layer indices in ``only``) into its predecessor."""
    out = []
    for i, layer in enumerate(net.layers):
        if isinstance(layer, BatchNorm) and (only is None or i - 1 in only):
            if not out or not isinstance(out[-1], (Linear, Conv2d)):
                raise UnsupportedTopologyError(f"batch-norm at position {i} has no linear/conv predecessor")
            out[-1] = fuse_pair(out[-1], layer)
        else:
            out.append(layer)
    return net.replace(out)


def flatten_conv_in(conv: Conv2d) -> np.ndarray:
    """Rows ``(kernel[o].ravel(), bias[o])``; ravel order is input channel, kernel row, kernel column."""
    return np.hstack([conv.kernel.reshape(conv.out_channels, -1), conv.bias[:, None]])


def unflatten_conv_in(A: np.ndarray, in_channels: int, kh: int, kw: int) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=np.float64)
    if A.shape[1] != in_channels * kh * kw + 1:
        raise ShapeError(f"matrix width {A.shape[1]} does not match {in_channels}x{kh}x{kw}+1")
    return A[:, :-1].reshape(-1, in_channels, kh, kw), A[:, -1].copy()


def flatten_conv_out(conv: Conv2d) -> np.ndarray:
    """Column ``c`` is ``kernel[:, c]`` raveled (output channel, kernel row, kernel column)."""
    return conv.kernel.transpose(0, 2, 3, 1).reshape(-1, conv.in_channels)


def unflatten_conv_out(C: np.ndarray, out_channels: int, kh: int, kw: int) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if C.shape[0] != out_channels * kh * kw:
        raise ShapeError(f"matrix height {C.shape[0]} does not match {out_channels}x{kh}x{kw}")
    return C.reshape(out_channels, kh, kw, -1).transpose(0, 3, 1, 2)


def layer_in_matrix(layer: Linear | Conv2d) -> np.ndarray:
    if isinstance(layer, Linear):
        return np.hstack([layer.weight, layer.bias[:, None]])
    return flatten_conv_in(layer)


def layer_out_matrix(layer: Linear | Conv2d, units: int) -> np.ndarray:
    """Next-layer weights as a matrix with one column per unit of the previous layer.

    A linear layer fed through a flatten gets one column per channel, stacking
    that channel's spatial weights.
    """
    if isinstance(layer, Conv2d):
        if layer.in_channels != units:
            raise ShapeError(f"next conv expects {layer.in_channels} channels, not {units}")
        return flatten_conv_out(layer)
    out, width = layer.weight.shape
    if width % units:
        raise ShapeError(f"next linear width {width} is not a multiple of {units} units")
    spatial = width // units
    return layer.weight.reshape(out, units, spatial).transpose(0, 2, 1).reshape(out * spatial, units)


def rebuild_out_layer(layer: Linear | Conv2d, C: np.ndarray) -> Linear | Conv2d:
    """Inverse of ``layer_out_matrix`` with a possibly different column count."""
    C = np.asarray(C, dtype=np.float64)
    units = C.shape[1]
    if isinstance(layer, Conv2d):
        kh, kw = layer.kernel.shape[2:]
        return Conv2d(unflatten_conv_out(C, layer.out_channels, kh, kw), layer.bias, layer.stride, layer.padding)
    out = layer.out_features
    spatial = C.shape[0] // out
    weight = C.reshape(out, spatial, units).transpose(0, 2, 1).reshape(out, units * spatial)
    return Linear(weight, layer.bias)


def rebuild_in_layer(layer: Linear | Conv2d, A: np.ndarray) -> Linear | Conv2d:
    A = np.asarray(A, dtype=np.float64)
    if isinstance(layer, Linear):
        return Linear(A[:, :-1], A[:, -1])
    kh, kw = layer.kernel.shape[2:]
    kernel, bias = unflatten_conv_in(A, layer.in_channels, kh, kw)
    return Conv2d(kernel, bias, layer.stride, layer.padding)


def layer_params(layer) -> int:
    if isinstance(layer, Linear):
        return layer.weight.size + layer.bias.size
    if isinstance(layer, Conv2d):
        return layer.kernel.size + layer.bias.size
    if isinstance(layer, BatchNorm):
        # running statistics are buffers, not parameters
        return layer.gamma.size + layer.beta.size
    return 0


def count_params(net: Network) -> int:
    return int(sum(layer_params(l) for l in net.layers))


def layer_flops(layer, in_shape: tuple, out_shape: tuple) -> int:
    if isinstance(layer, Linear):
        return 2 * layer.in_features * layer.out_features
    if isinstance(layer, Conv2d):
        kh, kw = layer.kernel.shape[2:]
        return 2 * kh * kw * layer.in_channels * prod(out_shape)
    return 0


def count_flops(net: Network, input_shape: tuple | None = None) -> int:
    if input_shape is not None and tuple(input_shape) != net.input_shape:
        net = Network(net.layers, tuple(input_shape))
    return int(sum(layer_flops(l, net.shapes[i], net.shapes[i + 1]) for i, l in enumerate(net.layers)))
