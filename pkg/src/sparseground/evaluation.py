"""Segmentation metrics against labeled clouds, and runtime benchmarks."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .baselines import lpr_fit, vanilla_ransac
from .config import DetectConfig
from .partition import GroundLabeling, detect_ground, read_labeling
from .scan import DEFAULT_ROWS, PointCloud, load_cloud

METHODS = ("proposed", "vanilla", "lpr")


class IdMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentationMetrics:
    """Confusion counts; a ratio with a zero denominator is ``None`` (undefined), never 0."""

    true_positives: int
    false_positives: int
    false_negatives: int
    true_negatives: int

    @property
    def total(self) -> int:
        return self.true_positives + self.false_positives + self.false_negatives + self.true_negatives

    @property
    def precision(self) -> Optional[float]:
        denom = self.true_positives + self.false_positives
        return self.true_positives / denom if denom else None

    @property
    def recall(self) -> Optional[float]:
        denom = self.true_positives + self.false_negatives
        return self.true_positives / denom if denom else None

    @property
    def f1(self) -> Optional[float]:
        p, r = self.precision, self.recall
        if p is None or r is None:
            return None
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def as_dict(self) -> Dict[str, object]:
        return {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "true_negatives": self.true_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }

    def format(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            if value is None:
                value = "undefined"
            elif isinstance(value, float):
                value = f"{value:.6f}"
            lines.append(f"{key}: {value}")
        return "\n".join(lines)


def confusion(predicted: np.ndarray, truth: np.ndarray) -> SegmentationMetrics:
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    return SegmentationMetrics(
        int(np.count_nonzero(predicted & truth)),
        int(np.count_nonzero(predicted & ~truth)),
        int(np.count_nonzero(~predicted & truth)),
        int(np.count_nonzero(~predicted & ~truth)),
    )


def align(predicted: GroundLabeling, truth_ids: np.ndarray, truth_labels: np.ndarray):
    """Truth labels matching each predicted point id.

    Every predicted id must exist in the truth; truth points the detector
    never saw (e.g. beyond the crop radius) are ignored.
    """
    truth_ids = np.asarray(truth_ids, dtype=np.int64)
    order = np.argsort(truth_ids)
    sorted_ids = truth_ids[order]
    pos = np.searchsorted(sorted_ids, predicted.point_id)
    pos = np.clip(pos, 0, max(len(sorted_ids) - 1, 0))
    found = len(sorted_ids) > 0 and np.all(sorted_ids[pos] == predicted.point_id)
    if len(predicted) and not found:
        missing = int(np.count_nonzero(len(sorted_ids) == 0 or sorted_ids[pos] != predicted.point_id))
        raise IdMismatchError(f"{missing} predicted point ids are absent from the truth")
    return np.asarray(truth_labels)[order][pos] != 0


def score(predicted: GroundLabeling, truth: PointCloud) -> SegmentationMetrics:
    if truth.label is None:
        raise ValueError("truth cloud carries no labels")
    if len(predicted) == 0:
        raise IdMismatchError("prediction is empty")
    labels = align(predicted, truth.point_id, truth.label)
    return confusion(predicted.ground, labels)


def subset_metrics(predicted: GroundLabeling, truth: PointCloud, select: np.ndarray) -> SegmentationMetrics:
    """Metrics restricted to the truth points where ``select`` is true (indexed like ``truth``)."""
    keep = np.isin(predicted.point_id, truth.point_id[np.asarray(select, dtype=bool)])
    sub = GroundLabeling(predicted.point_id[keep], predicted.ground[keep], predicted.method)
    labels = align(sub, truth.point_id, truth.label)
    return confusion(sub.ground, labels)


def load_prediction(path, rows: int = DEFAULT_ROWS) -> GroundLabeling:
    """Read either a ``point_id,ground`` labeling or a labeled cloud (its label column is the prediction)."""
    with open(path, encoding="utf-8") as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line.strip()
                break
    if first.startswith("point_id") or first.count(",") == 1:
        return read_labeling(path)
    cloud = load_cloud(path, rows=rows)
    if cloud.label is None:
        raise ValueError(f"{path}: cloud has no label column to use as a prediction")
    return GroundLabeling(cloud.point_id.copy(), cloud.label != 0, "file")


# --------------------------------------------------------------------------
# benchmarking

def run_method(method: str, cloud: PointCloud, config: DetectConfig) -> GroundLabeling:
    if method == "proposed":
        return detect_ground(cloud, config)
    if method == "vanilla":
        return vanilla_ransac(cloud, config)[1]
    if method == "lpr":
        return lpr_fit(cloud, config)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


@dataclass(frozen=True)
class BenchRow:
    method: str
    runs: int
    mean_ms: float
    p95_ms: float
    points: int
    config_hash: str


@dataclass(frozen=True)
class BenchReport:
    rows: List[BenchRow]

    def by_method(self) -> Dict[str, BenchRow]:
        return {r.method: r for r in self.rows}

    def format(self) -> str:
        out = [f"{'method':<10} {'runs':>5} {'mean_ms':>9} {'p95_ms':>9} {'points':>7}  config"]
        for r in self.rows:
            out.append(f"{r.method:<10} {r.runs:>5} {r.mean_ms:>9.2f} {r.p95_ms:>9.2f} {r.points:>7}  {r.config_hash}")
        return "\n".join(out)

    def csv(self) -> str:
        out = ["method,runs,mean_ms,p95_ms,points,config_hash"]
        for r in self.rows:
            out.append(f"{r.method},{r.runs},{r.mean_ms:.4f},{r.p95_ms:.4f},{r.points},{r.config_hash}")
        return "\n".join(out) + "\n"


def time_calls(fn: Callable[[int], object], runs: int, warmup: int = 1) -> np.ndarray:
    """Wall-clock milliseconds of ``fn(run_index)`` over ``runs`` calls."""
    for i in range(warmup):
        fn(i)
    times = np.empty(runs)
    for i in range(runs):
        start = time.perf_counter()
        fn(i)
        times[i] = (time.perf_counter() - start) * 1000.0
    return times


def bench(method: str, cloud: PointCloud, runs: int = 20, config: DetectConfig = DetectConfig()) -> BenchRow:
    """Time one method; run ``i`` uses seed ``config.seed + i``. I/O is not timed."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    times = time_calls(lambda i: run_method(method, cloud, config.updated(seed=config.seed + i)), runs)
    return BenchRow(method, runs, float(times.mean()), float(np.percentile(times, 95)), len(cloud), config.digest())


def bench_all(cloud: PointCloud, methods: Sequence[str] = METHODS, runs: int = 20,
              config: DetectConfig = DetectConfig()) -> BenchReport:
    return BenchReport([bench(m, cloud, runs, config) for m in methods])
