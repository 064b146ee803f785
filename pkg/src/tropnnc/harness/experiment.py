"""Method x target x seed sweeps with CSV/SVG output."""

from __future__ import annotations

import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tropnnc.compression.network import CompressionConfig, compress_network, normalize_method
from tropnnc.harness.data import DatasetSplit, filter_classes, load_idx
from tropnnc.harness.train import eval_accuracy, train_mlp
from tropnnc.nn.tnnc import load_model
from tropnnc.nn.transforms import count_flops, count_params

CSV_HEADER = "method,target,seed,accuracy,params,flops,wall_ms"
SUMMARY_HEADER = "method,target,mean_accuracy,std_accuracy,runs,failed"
THREADS_ENV = "TROPNNC_THREADS"


@dataclass
class ExperimentSpec:
    test_images: str
    test_labels: str
    methods: list
    targets: list
    seeds: list = field(default_factory=lambda: [0])
    output_path: str | None = None
    model_path: str | None = None
    # with no model_path a fresh MLP is trained per seed on the train split
    train_images: str | None = None
    train_labels: str | None = None
    train_arch: list | None = None
    epochs: int = 5
    lr: float = 0.1
    batch: int = 32
    target_kind: str = "ratio"  # ratio | k | threshold
    variant: int | None = None
    num_iter: int = 10
    classes: list | None = None
    layers: list | None = None
    fuse_bn: str = "none"
    plot_path: str | None = None

    def __post_init__(self):
        if not self.methods or not self.targets:
            raise ValueError("an experiment needs at least one method and one target")
        self.methods = [normalize_method(m) for m in self.methods]
        if self.target_kind not in ("ratio", "k", "threshold"):
            raise ValueError(f"unknown target kind {self.target_kind!r}")
        if self.model_path is None and (self.train_arch is None or self.train_images is None):
            raise ValueError("give either model_path or train_arch with a train split")

    def config(self, method: str, target, seed: int) -> CompressionConfig:
        kw = {"ratio": None, "k": None, "threshold_c": None}
        if self.target_kind == "ratio":
            kw["ratio"] = float(target)
        elif self.target_kind == "k":
            kw["k"] = int(target)
        else:
            kw["threshold_c"] = float(target)
        return CompressionConfig(
            method,
            variant=self.variant,
            num_iter=self.num_iter,
            seed=seed,
            fuse_bn=self.fuse_bn,
            layers=self.layers,
            **kw,
        )


@dataclass
class Cell:
    method: str
    target: float
    seed: int
    accuracy: float = math.nan
    params: int = 0
    flops: int = 0
    wall_ms: float = 0.0
    error: str | None = None

    def csv(self) -> str:
        return (
            f"{self.method},{self.target:g},{self.seed},{self.accuracy:.6f},"
            f"{self.params},{self.flops},{self.wall_ms:.1f}"
        )


@dataclass
class ExperimentResult:
    cells: list
    baseline: dict  # seed -> (accuracy, params, flops) of the uncompressed model

    def summary(self) -> list[tuple]:
        rows = []
        keys = dict.fromkeys((c.method, c.target) for c in self.cells)
        for method, target in keys:
            group = [c for c in self.cells if c.method == method and c.target == target]
            acc = np.array([c.accuracy for c in group if c.error is None])
            mean = float(acc.mean()) if acc.size else math.nan
            std = float(acc.std(ddof=1)) if acc.size > 1 else 0.0
            rows.append((method, target, mean, std, acc.size, len(group) - acc.size))
        return rows

    def mean_accuracy(self, method: str, target) -> float:
        for m, t, mean, *_ in self.summary():
            if m == method and math.isclose(t, float(target)):
                return mean
        raise KeyError((method, target))


def thread_count(default: int | None = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = default or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return n


def _maybe_filter(ds: DatasetSplit, classes) -> DatasetSplit:
    return filter_classes(ds, classes) if classes else ds


def _models(spec: ExperimentSpec) -> dict:
    if spec.model_path is not None:
        net = load_model(spec.model_path)
        return {s: net for s in spec.seeds}
    train = _maybe_filter(load_idx(spec.train_images, spec.train_labels), spec.classes)
    return {s: train_mlp(spec.train_arch, train, spec.epochs, spec.lr, spec.batch, s) for s in spec.seeds}


def run_cells(spec: ExperimentSpec, models: dict, test: DatasetSplit, workers: int | None = None) -> ExperimentResult:
    """Evaluate every (method, target, seed) cell against in-memory models keyed by seed."""
    jobs = [(m, t, s) for m in spec.methods for t in spec.targets for s in spec.seeds]

    def run(job) -> Cell:
        method, target, seed = job
        cell = Cell(method, float(target), seed)
        start = time.perf_counter()
        try:
            net, _ = compress_network(models[seed], spec.config(method, target, seed))
            cell.accuracy = eval_accuracy(net, test)
            cell.params, cell.flops = count_params(net), count_flops(net)
        except Exception as exc:  # a failing cell must not stop the sweep
            cell.error = f"{type(exc).__name__}: {exc}"
        cell.wall_ms = (time.perf_counter() - start) * 1000.0
        return cell

    with ThreadPoolExecutor(max_workers=thread_count(workers)) as pool:
        cells = list(pool.map(run, jobs))
    baseline = {s: (eval_accuracy(n, test), count_params(n), count_flops(n)) for s, n in models.items()}
    return ExperimentResult(cells, baseline)


def write_results(result: ExperimentResult, path) -> None:
    path = Path(path)
    lines = [CSV_HEADER] + [c.csv() for c in result.cells]
    path.write_text("\n".join(lines) + "\n")
    summary = [SUMMARY_HEADER] + [
        f"{m},{t:g},{mean:.6f},{std:.6f},{n},{bad}" for m, t, mean, std, n, bad in result.summary()
    ]
    path.with_suffix(".summary.csv").write_text("\n".join(summary) + "\n")


def plot_results(result: ExperimentResult, path, title: str = "") -> None:
    """Accuracy against remaining-neuron percentage, one line per method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    rows = result.summary()
    for method in dict.fromkeys(r[0] for r in rows):
        pts = sorted((t, mean, std) for m, t, mean, std, *_ in rows if m == method)
        t, mean, std = (np.array(v) for v in zip(*pts))
        ax.errorbar(100 * t, 100 * mean, yerr=100 * std, marker="o", capsize=3, label=method)
    ax.set_xlabel("remaining neurons (%)")
    ax.set_ylabel("accuracy (%)")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    test = _maybe_filter(load_idx(spec.test_images, spec.test_labels), spec.classes)
    result = run_cells(spec, _models(spec), test)
    for c in result.cells:
        if c.error:
            print(f"cell {c.method}/{c.target:g}/{c.seed} failed: {c.error}", file=sys.stderr)
    if spec.output_path:
        write_results(result, spec.output_path)
    if spec.plot_path and spec.target_kind == "ratio":
        plot_results(result, spec.plot_path)
    return result
