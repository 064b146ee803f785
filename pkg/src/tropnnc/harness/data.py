"""IDX image/label files (optionally gzip-compressed) and class filtering."""

from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tropnnc.errors import DatasetError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    images: np.ndarray  # (N, H, W) or (N, d), values in [0, 1]
    labels: np.ndarray  # (N,) ints

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels).astype(np.int64)
        if images.shape[0] != labels.shape[0]:
            raise DatasetError(f"{images.shape[0]} images but {labels.shape[0]} labels")
        if labels.size and labels.min() < 0:
            raise DatasetError("labels must be nonnegative")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def sample_shape(self) -> tuple:
        return self.images.shape[1:]


def _read(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise DatasetError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def _parse(raw: bytes, magic: int, ndims: int, path) -> np.ndarray:
    header = 4 + 4 * ndims
    if len(raw) < header:
        raise DatasetError(f"{path}: file too short for an IDX header")
    found = int.from_bytes(raw[:4], "big")
    if found != magic:
        raise DatasetError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = [int.from_bytes(raw[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndims)]
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise DatasetError(f"{path}: payload holds {len(raw) - header} bytes, header needs {size}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> DatasetSplit:
    images = _parse(_read(images_path), IMAGES_MAGIC, 3, images_path)
    labels = _parse(_read(labels_path), LABELS_MAGIC, 1, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DatasetError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return DatasetSplit(images.astype(np.float64) / 255.0, labels)


def write_idx(images, labels, images_path, labels_path, compress: bool = False) -> None:
    """Write uint8 images ``(N, H, W)`` and labels ``(N,)`` as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    img = IMAGES_MAGIC.to_bytes(4, "big") + b"".join(d.to_bytes(4, "big") for d in images.shape)
    lab = LABELS_MAGIC.to_bytes(4, "big") + labels.shape[0].to_bytes(4, "big")
    for path, payload in ((images_path, img + images.tobytes()), (labels_path, lab + labels.tobytes())):
        Path(path).write_bytes(gzip.compress(payload, mtime=0) if compress else payload)


def filter_classes(ds: DatasetSplit, classes, relabel: bool = True) -> DatasetSplit:
    """Keep the listed classes, relabelled ``0..len(classes)-1`` in the given order.

    ``relabel=False`` keeps the original label values.
    """
    classes = [int(c) for c in classes]
    if len(set(classes)) != len(classes):
        raise DatasetError("classes must be distinct")
    lookup = np.full(max(classes + [ds.num_classes - 1]) + 1, -1)
    lookup[classes] = np.arange(len(classes))
    mapped = lookup[ds.labels]
    keep = mapped >= 0
    if not np.any(keep):
        raise DatasetError(f"no samples of classes {classes}")
    return DatasetSplit(ds.images[keep], mapped[keep] if relabel else ds.labels[keep])
