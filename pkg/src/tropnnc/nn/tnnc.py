"""Reader and writer for the TNNC v1 model container (layout in docs/model_format.md)."""

from __future__ import annotations

import json
from math import prod
from pathlib import Path

import numpy as np

from tropnnc.errors import ModelFormatError, ShapeError
from tropnnc.nn.layers import AvgPool, BatchNorm, Conv2d, Flatten, Linear, MaxPool, Network, ReLU

MAGIC = b"TNNC1"
DTYPES = {"f64": np.dtype("<f8"), "f32": np.dtype("<f4")}

_TENSORS = {
    "linear": ("weight", "bias"),
    "conv2d": ("kernel", "bias"),
    "batchnorm": ("gamma", "beta", "running_mean", "running_var"),
}
_SCALARS = {
    "conv2d": ("stride", "padding"),
    "maxpool": ("size", "stride"),
    "avgpool": ("size", "stride"),
    "batchnorm": ("eps",),
}
_CLASSES = {
    "linear": Linear,
    "conv2d": Conv2d,
    "relu": ReLU,
    "maxpool": MaxPool,
    "avgpool": AvgPool,
    "batchnorm": BatchNorm,
    "flatten": Flatten,
}


def dumps(net: Network, dtype: str = "f64") -> bytes:
    if dtype not in DTYPES:
        raise ValueError(f"dtype must be one of {sorted(DTYPES)}")
    np_dtype = DTYPES[dtype]
    layers, tensors, chunks = [], {}, []
    offset = 0
    for i, layer in enumerate(net.layers):
        entry: dict = {"kind": layer.kind}
        for name in _SCALARS.get(layer.kind, ()):
            entry[name] = getattr(layer, name)
        names = {}
        for name in _TENSORS.get(layer.kind, ()):
            key = f"layer{i}.{name}"
            data = np.ascontiguousarray(getattr(layer, name), dtype=np_dtype).tobytes()
            tensors[key] = {"dtype": dtype, "shape": list(getattr(layer, name).shape), "offset": offset}
            chunks.append(data)
            offset += len(data)
            names[name] = key
        if names:
            entry["tensors"] = names
        layers.append(entry)
    header = {
        "input_shape": list(net.input_shape),
        "layers": layers,
        "tensors": tensors,
        "blob_bytes": offset,
    }
    text = json.dumps(header, indent=1).encode("utf-8")
    return MAGIC + b"\n" + f"header_bytes={len(text)}\n".encode() + text + b"".join(chunks)


def loads(raw: bytes) -> Network:
    head, sep, rest = raw.partition(b"\n")
    if head != MAGIC or not sep:
        raise ModelFormatError("missing TNNC1 magic")
    line, sep, rest = rest.partition(b"\n")
    if not sep or not line.startswith(b"header_bytes="):
        raise ModelFormatError("missing header_bytes line")
    try:
        size = int(line[len(b"header_bytes=") :])
    except ValueError as exc:
        raise ModelFormatError(f"bad header_bytes value {line!r}") from exc
    if size < 0 or size > len(rest):
        raise ModelFormatError("header length exceeds file size")
    try:
        header = json.loads(rest[:size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"header is not valid JSON: {exc}") from exc
    blob = rest[size:]
    try:
        return _build(header, blob)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"inconsistent model file: {exc}") from exc


def _read_tensor(spec: dict, blob: bytes) -> np.ndarray:
    if spec["dtype"] not in DTYPES:
        raise ModelFormatError(f"unknown dtype {spec['dtype']!r}")
    dt = DTYPES[spec["dtype"]]
    shape = tuple(int(s) for s in spec["shape"])
    start = int(spec["offset"])
    stop = start + prod(shape) * dt.itemsize
    if start < 0 or stop > len(blob):
        raise ModelFormatError(f"tensor at offset {start} runs past the blob ({len(blob)} bytes)")
    return np.frombuffer(blob, dtype=dt, count=prod(shape), offset=start).astype(np.float64).reshape(shape)


def _build(header: dict, blob: bytes) -> Network:
    declared = int(header["blob_bytes"])
    if declared != len(blob):
        raise ModelFormatError(f"header declares {declared} blob bytes, file has {len(blob)}")
    tensors = header["tensors"]
    layers = []
    for entry in header["layers"]:
        kind = entry["kind"]
        if kind not in _CLASSES:
            raise ModelFormatError(f"unknown layer kind {kind!r}")
        kwargs = {name: entry[name] for name in _SCALARS.get(kind, ()) if name in entry}
        for name in _TENSORS.get(kind, ()):
            kwargs[name] = _read_tensor(tensors[entry["tensors"][name]], blob)
        try:
            layers.append(_CLASSES[kind](**kwargs))
        except ShapeError as exc:
            raise ModelFormatError(f"{kind} layer: {exc}") from exc
    return Network(tuple(layers), tuple(header["input_shape"]))


def save_model(net: Network, path, dtype: str = "f64") -> None:
    Path(path).write_bytes(dumps(net, dtype))


def load_model(path) -> Network:
    return loads(Path(path).read_bytes())
