"""Reference architectures with seeded random weights."""

from __future__ import annotations

import numpy as np

from tropnnc.nn.layers import BatchNorm, Conv2d, Flatten, Linear, MaxPool, Network, ReLU

MLP_SMALL = (784, 64, 10)
MLP_DEEP = (784, 128, 64, 10)
IMAGE_SHAPE = (28, 28)


def random_linear(rng, n_in: int, n_out: int) -> Linear:
    return Linear(rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in), 0.1 * rng.standard_normal(n_out))


def random_conv(rng, c_in: int, c_out: int, k: int, stride: int = 1, padding: int = 0) -> Conv2d:
    fan_in = c_in * k * k
    kernel = rng.standard_normal((c_out, c_in, k, k)) * np.sqrt(2.0 / fan_in)
    return Conv2d(kernel, 0.1 * rng.standard_normal(c_out), stride, padding)


def random_batchnorm(rng, channels: int, eps: float = 1e-5) -> BatchNorm:
    return BatchNorm(
        rng.uniform(0.5, 1.5, channels),
        0.1 * rng.standard_normal(channels),
        0.1 * rng.standard_normal(channels),
        rng.uniform(0.5, 2.0, channels),
        eps,
    )


def mlp(arch=MLP_SMALL, seed: int = 0, input_shape=IMAGE_SHAPE) -> Network:
    """ReLU MLP; a flatten is prepended when ``input_shape`` is not 1-D."""
    rng = np.random.default_rng(seed)
    input_shape = tuple(input_shape) if input_shape is not None else (arch[0],)
    layers = [Flatten()] if len(input_shape) > 1 else []
    for i, (a, b) in enumerate(zip(arch[:-1], arch[1:])):
        if i:
            layers.append(ReLU())
        layers.append(random_linear(rng, a, b))
    return Network(tuple(layers), input_shape)


def lenet_like(seed: int = 0, batchnorm: bool = True) -> Network:
    """Two conv blocks and three linear layers on 1x28x28 inputs."""
    rng = np.random.default_rng(seed)
    layers = [random_conv(rng, 1, 6, 5, padding=2)]
    if batchnorm:
        layers.append(random_batchnorm(rng, 6))
    layers += [ReLU(), MaxPool(2), random_conv(rng, 6, 16, 5)]
    if batchnorm:
        layers.append(random_batchnorm(rng, 16))
    layers += [
        ReLU(),
        MaxPool(2),
        Flatten(),
        random_linear(rng, 16 * 5 * 5, 120),
        ReLU(),
        random_linear(rng, 120, 84),
        ReLU(),
        random_linear(rng, 84, 10),
    ]
    return Network(tuple(layers), (1, 28, 28))


def small_cnn(seed: int = 0, batchnorm: bool = False) -> Network:
    """A tiny conv net on 2x10x10 inputs, cheap enough for exhaustive tests."""
    rng = np.random.default_rng(seed)
    layers = [random_conv(rng, 2, 5, 3, padding=1)]
    if batchnorm:
        layers.append(random_batchnorm(rng, 5))
    layers += [ReLU(), MaxPool(2), random_conv(rng, 5, 4, 3)]
    if batchnorm:
        layers.append(random_batchnorm(rng, 4))
    layers += [ReLU(), Flatten(), random_linear(rng, 4 * 3 * 3, 8), ReLU(), random_linear(rng, 8, 3)]
    return Network(tuple(layers), (2, 10, 10))
