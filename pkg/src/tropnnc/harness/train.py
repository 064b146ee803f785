"""A small numpy SGD trainer for ReLU MLPs, and accuracy evaluation."""

from __future__ import annotations

from math import prod

import numpy as np

from tropnnc.errors import ShapeError
from tropnnc.harness.data import DatasetSplit
from tropnnc.nn.layers import Flatten, Linear, Network, ReLU, forward

EVAL_CHUNK = 2048


def _assemble(weights, biases, sample_shape) -> Network:
    layers = [Flatten()] if len(sample_shape) > 1 else []
    for i, (w, b) in enumerate(zip(weights, biases)):
        if i:
            layers.append(ReLU())
        layers.append(Linear(w, b))
    return Network(tuple(layers), sample_shape)


def train_mlp(
    arch, ds: DatasetSplit, epochs: int = 5, lr: float = 0.1, batch: int = 32, seed: int = 0
) -> Network:
    """Minibatch SGD on softmax cross-entropy; He-normal weights, zero biases."""
    arch = [int(a) for a in arch]
    if len(arch) < 2:
        raise ValueError("arch needs an input and an output width")
    if arch[0] != prod(ds.sample_shape):
        raise ShapeError(f"arch[0]={arch[0]} but samples have {prod(ds.sample_shape)} features")
    if ds.num_classes > arch[-1]:
        raise ShapeError(f"{ds.num_classes} classes but only {arch[-1]} outputs")
    if epochs < 0 or batch < 1:
        raise ValueError("epochs must be >= 0 and batch >= 1")
    rng = np.random.default_rng(seed)
    W = [rng.standard_normal((o, i)) * np.sqrt(2.0 / i) for i, o in zip(arch[:-1], arch[1:])]
    b = [np.zeros(o) for o in arch[1:]]
    x_all = ds.images.reshape(len(ds), -1)
    y_all = ds.labels
    n = len(ds)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            acts = [x_all[idx]]
            for li in range(len(W)):
                z = acts[-1] @ W[li].T + b[li]
                acts.append(np.maximum(z, 0.0) if li < len(W) - 1 else z)
            logits = acts[-1]
            logits = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(logits)
            p /= p.sum(axis=1, keepdims=True)
            loss = -np.log(p[np.arange(idx.size), y_all[idx]] + 1e-300).mean()
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch starting {start}; lower lr ({lr})")
            grad = p
            grad[np.arange(idx.size), y_all[idx]] -= 1.0
            grad /= idx.size
            for li in range(len(W) - 1, -1, -1):
                gW = grad.T @ acts[li]
                gb = grad.sum(axis=0)
                if li:
                    grad = (grad @ W[li]) * (acts[li] > 0)
                W[li] -= lr * gW
                b[li] -= lr * gb
    return _assemble(W, b, ds.sample_shape)


def predict(net: Network, images) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    out = [forward(net, images[i : i + EVAL_CHUNK]) for i in range(0, images.shape[0], EVAL_CHUNK)]
    return np.argmax(np.concatenate(out), axis=1)  # argmax keeps the lowest index on ties


def eval_accuracy(net: Network, ds: DatasetSplit) -> float:
    if len(ds) == 0:
        return 0.0
    return float(np.mean(predict(net, ds.images) == ds.labels))
