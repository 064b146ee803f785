"""Apply the layer compressors to whole networks (MLPs and plain conv stacks)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from tropnnc.compression import algorithms as alg
from tropnnc.compression.clustering import Clustering, hierarchical_cluster, kmeans, layer_threshold
from tropnnc.errors import UnsupportedTopologyError
from tropnnc.nn.layers import AvgPool, BatchNorm, Conv2d, Flatten, Linear, MaxPool, Network, ReLU
from tropnnc.nn.transforms import (
    count_flops,
    count_params,
    fuse_batchnorm,
    fuse_pair,
    layer_in_matrix,
    layer_out_matrix,
    rebuild_in_layer,
    rebuild_out_layer,
)

METHODS = (
    "tropnnc_single",
    "tropnnc",
    "tropnnc_iter",
    "tropnnc_iter_a6",
    "zonotope_kmeans",
    "neural_path_kmeans",
    "l1",
    "random",
)
SINGLE_OUTPUT = {"tropnnc_single", "zonotope_kmeans"}
PRUNING = {"l1", "random"}
FUSE_MODES = ("none", "all", "per-layer")


def normalize_method(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return key


@dataclass
class CompressionConfig:
    method: str
    ratio: float | None = None
    k: int | None = None
    threshold_c: float | None = None
    variant: int | None = None
    num_iter: int = alg.DEFAULT_ITERS
    seed: int = 0
    cluster_on_prefusion: bool = True
    fuse_bn: str = "none"
    layers: tuple | None = None  # ordinals among linear/conv layers; None = every hidden one
    split: tuple | None = None  # explicit (K+, K-) for single-output methods

    def __post_init__(self):
        self.method = normalize_method(self.method)
        given = [self.ratio is not None, self.k is not None, self.threshold_c is not None]
        if sum(given) != 1:
            raise ValueError("set exactly one of ratio, k, threshold_c")
        if self.ratio is not None and not 0 < self.ratio <= 1:
            raise ValueError(f"ratio must lie in (0, 1], got {self.ratio}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be positive")
        if self.threshold_c is not None:
            if self.variant not in (1, 2):
                raise ValueError("threshold targets need variant 1 or 2")
            if not self.threshold_c > 0:
                raise ValueError("threshold constant must be positive")
            if self.method in PRUNING:
                raise ValueError(f"{self.method} pruning takes a ratio or k, not a threshold")
        if self.num_iter < 0:
            raise ValueError("num_iter must be >= 0")
        if self.fuse_bn not in FUSE_MODES:
            raise ValueError(f"fuse_bn must be one of {FUSE_MODES}")
        if self.layers is not None:
            self.layers = tuple(int(i) for i in self.layers)

    def target_k(self, n: int) -> int:
        if self.k is not None:
            return min(self.k, n)
        return max(1, int(round(self.ratio * n)))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class LayerReport:
    ordinal: int
    kind: str
    n: int
    K: int
    method: str
    threshold: float | None = None
    fused_bn: bool = False
    criterion_trace: list = field(default_factory=list)


@dataclass
class NetworkReport:
    layers: list
    params_before: int
    params_after: int
    flops_before: int
    flops_after: int
    config: dict

    CSV_HEADER = "layer,kind,n,K,method,threshold,fused_bn,criterion_trace"

    def csv_rows(self) -> list[str]:
        rows = []
        for r in self.layers:
            trace = " ".join(repr(float(v)) for v in r.criterion_trace)
            thr = "" if r.threshold is None else repr(float(r.threshold))
            rows.append(f"{r.ordinal},{r.kind},{r.n},{r.K},{r.method},{thr},{int(r.fused_bn)},{trace}")
        return rows


_PASS_THROUGH = (ReLU, MaxPool, AvgPool, Flatten)


def _locate(net: Network, ordinal: int) -> tuple[int, int, int | None]:
    """Positions of the target layer, the next linear/conv layer and a batch-norm right after the target."""
    params = net.parametric_indices()
    if not 0 <= ordinal < len(params) - 1:
        raise UnsupportedTopologyError(
            f"layer ordinal {ordinal} is not a hidden linear/conv layer (valid: 0..{len(params) - 2})"
        )
    p, q = params[ordinal], params[ordinal + 1]
    between = net.layers[p + 1 : q]
    bn = None
    if between and isinstance(between[0], BatchNorm):
        bn = p + 1
        between = between[1:]
    if not between or not isinstance(between[0], ReLU):
        raise UnsupportedTopologyError(f"layer {ordinal} is not followed by a ReLU")
    if not all(isinstance(l, _PASS_THROUGH) for l in between):
        raise UnsupportedTopologyError(f"unsupported layers between linear/conv layers {ordinal} and {ordinal + 1}")
    return p, q, bn


def _hier(vectors, config: CompressionConfig) -> tuple[Clustering, float]:
    thr = layer_threshold(config.threshold_c, config.variant, vectors)
    return hierarchical_cluster(vectors, thr), thr


def _single_output_clustering(A, c, config: CompressionConfig):
    # threshold path: sign classes are clustered separately
    gens = np.abs(c)[:, None] * A
    labels = np.full(c.size, -1)
    signs, offset, thr = [], 0, None
    for idx, s in ((np.flatnonzero(c > 0), 1), (np.flatnonzero(c < 0), -1)):
        if idx.size == 0:
            continue
        sub, thr = _hier(gens[idx], config)
        labels[idx] = sub.labels + offset
        signs += [s] * sub.K
        offset += sub.K
    return Clustering(labels, sign_class=np.array(signs)), thr


def _compress_matrices(A, C, A_cluster, C_cluster, config: CompressionConfig):
    """Run the configured method; ``*_cluster`` are the matrices clustering is computed on."""
    n = A.shape[0]
    method = config.method
    thr = None
    if method in SINGLE_OUTPUT:
        if C.shape[0] != 1:
            raise UnsupportedTopologyError(f"{method} needs a single-output next layer, found {C.shape[0]} outputs")
        c, c_cl = C[0], C_cluster[0]
        reduce = (lambda g: g.sum(axis=0)) if method == "tropnnc_single" else (lambda g: g.mean(axis=0))
        if config.threshold_c is None:
            K = config.target_k(n)
            _, clustering = alg.single_output_clusters(A_cluster, c_cl, K, config.seed, config.split)
        else:
            clustering, thr = _single_output_clustering(A_cluster, c_cl, config)
        gens = np.abs(c)[:, None] * A
        A_new = np.array([reduce(gens[idx]) for idx in clustering.clusters()]).reshape(-1, A.shape[1])
        C_new = clustering.sign_class[None, :].astype(np.float64)
        return alg.Compressed(A_new, C_new, clustering, []), thr

    if config.threshold_c is None:
        clustering = kmeans(np.hstack([A_cluster, C_cluster.T]), config.target_k(n), config.seed)
    else:
        clustering, thr = _hier(np.hstack([A_cluster, C_cluster.T]), config)
    if method == "tropnnc":
        out = alg.compress_multi_output(A, C, clustering.K, clustering=clustering)
    elif method == "neural_path_kmeans":
        out = alg.baseline_neural_path_kmeans(A, C, clustering.K, clustering=clustering)
    else:
        out = alg.compress_multi_output_iterative(
            A, C, clustering.K, config.num_iter, method == "tropnnc_iter_a6", clustering=clustering
        )
    return out, thr


def _prune_keep(layer, n: int, config: CompressionConfig) -> np.ndarray:
    if config.k is not None:
        remove = n - min(config.k, n)
    else:
        remove = math.ceil((1.0 - config.ratio) * n - 1e-9)
    remove = min(max(remove, 0), n - 1)
    if config.method == "l1":
        w = layer.weight if isinstance(layer, Linear) else layer.kernel.reshape(layer.out_channels, -1)
        order = np.argsort(np.abs(w).sum(axis=1), kind="stable")
        drop = order[:remove]
    else:
        drop = np.random.default_rng(config.seed).choice(n, size=remove, replace=False)
    return np.setdiff1d(np.arange(n), drop)


def _slice_bn(bn: BatchNorm, keep: np.ndarray) -> BatchNorm:
    return BatchNorm(bn.gamma[keep], bn.beta[keep], bn.running_mean[keep], bn.running_var[keep], bn.eps)


def compress_layer(net: Network, layer_index: int, config: CompressionConfig) -> tuple[Network, LayerReport]:
    """Compress the hidden linear/conv layer with ordinal ``layer_index`` (0 = first linear/conv layer).

    The following linear/conv layer absorbs the new output weights; its bias is
    left alone, as are any ReLU, pooling or flatten layers in between.
    """
    p, q, bn = _locate(net, layer_index)
    layers = list(net.layers)
    target, nxt = layers[p], layers[q]
    units = target.out_features if isinstance(target, Linear) else target.out_channels
    kind = target.kind

    if config.method in PRUNING:
        keep = _prune_keep(target, units, config)
        A = layer_in_matrix(target)[keep]
        C = layer_out_matrix(nxt, units)[:, keep]
        layers[p] = rebuild_in_layer(target, A)
        layers[q] = rebuild_out_layer(nxt, C)
        if bn is not None:
            layers[bn] = _slice_bn(layers[bn], keep)
        report = LayerReport(layer_index, kind, units, keep.size, config.method)
        return net.replace(layers), report

    fused = False
    A_cluster = layer_in_matrix(target)
    if bn is not None:
        if config.fuse_bn != "per-layer":
            raise UnsupportedTopologyError(
                f"layer {layer_index} is followed by batch-norm; fuse it first (fuse_bn=all or per-layer)"
            )
        target = fuse_pair(target, layers[bn])
        fused = True
        if not config.cluster_on_prefusion:
            A_cluster = layer_in_matrix(target)
    A = layer_in_matrix(target)
    C = layer_out_matrix(nxt, units)
    out, thr = _compress_matrices(A, C, A_cluster, C, config)
    layers[p] = rebuild_in_layer(target, out.A)
    layers[q] = rebuild_out_layer(nxt, out.C)
    if bn is not None:
        del layers[bn]
    report = LayerReport(layer_index, kind, units, out.A.shape[0], config.method, thr, fused, list(out.trace))
    return net.replace(layers), report


def compress_network(net: Network, config: CompressionConfig) -> tuple[Network, NetworkReport]:
    """Compress the selected hidden layers front to back."""
    params0, flops0 = count_params(net), count_flops(net)
    if config.fuse_bn == "all":
        net = fuse_batchnorm(net)
    hidden = len(net.parametric_indices()) - 1
    selected = range(hidden) if config.layers is None else config.layers
    reports = []
    for ordinal in selected:
        net, rep = compress_layer(net, ordinal, config)
        reports.append(rep)
    report = NetworkReport(reports, params0, count_params(net), flops0, count_flops(net), config.as_dict())
    return net, report


def baseline_l1(net: Network, ratio: float) -> Network:
    return compress_network(net, CompressionConfig("l1", ratio=ratio))[0]


def baseline_random(net: Network, ratio: float, seed: int = 0) -> Network:
    return compress_network(net, CompressionConfig("random", ratio=ratio, seed=seed))[0]
