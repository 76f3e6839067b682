"""Point-cloud data model, CSV ingestion, cropping, downsampling and range-scan organization.

A cloud is held column-wise in numpy arrays rather than as a list of point
objects; ``PointCloud.point(i)`` gives a single ``Point`` view when needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

DEFAULT_ROWS = 16
DEFAULT_COLS = 1800


class CloudFormatError(ValueError):
    """Raised when a point-cloud file cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Point:
    x: float
    y: float
    z: float
    beam: int
    azimuth_step: int
    point_id: int = 0


@dataclass
class PointCloud:
    """Column-wise point storage.

    ``label`` is optional ground truth (1 ground, 0 not); it is only consumed
    by evaluation.
    """

    xyz: np.ndarray
    beam: np.ndarray
    azimuth_step: np.ndarray
    point_id: np.ndarray
    label: Optional[np.ndarray] = None

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        n = len(self.xyz)
        self.beam = np.asarray(self.beam, dtype=np.int64).reshape(n)
        self.azimuth_step = np.asarray(self.azimuth_step, dtype=np.int64).reshape(n)
        self.point_id = np.asarray(self.point_id, dtype=np.int64).reshape(n)
        if self.label is not None:
            self.label = np.asarray(self.label, dtype=np.int8).reshape(n)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)), [], [], [])

    @classmethod
    def from_points(cls, points: Sequence[Point], labels=None) -> "PointCloud":
        if len(points) == 0:
            return cls.empty()
        xyz = [(p.x, p.y, p.z) for p in points]
        return cls(
            xyz,
            [p.beam for p in points],
            [p.azimuth_step for p in points],
            [p.point_id for p in points],
            labels,
        )

    def __len__(self) -> int:
        return len(self.xyz)

    def __getitem__(self, index) -> "PointCloud":
        """Subset by boolean mask or integer index array; ids are carried along."""
        label = None if self.label is None else self.label[index]
        return PointCloud(
            self.xyz[index],
            self.beam[index],
            self.azimuth_step[index],
            self.point_id[index],
            label,
        )

    def point(self, i: int) -> Point:
        x, y, z = (float(v) for v in self.xyz[i])
        return Point(x, y, z, int(self.beam[i]), int(self.azimuth_step[i]), int(self.point_id[i]))

    def points(self) -> Iterator[Point]:
        for i in range(len(self)):
            yield self.point(i)

    @property
    def ranges(self) -> np.ndarray:
        """Euclidean distance from the frame origin."""
        return np.linalg.norm(self.xyz, axis=1)


@dataclass(frozen=True)
class CloudBounds:
    """Horizontal square ``[cx - h, cx + h] x [cy - h, cy + h]``."""

    center_x: float = 0.0
    center_y: float = 0.0
    half_extent: float = 40.0

    def __post_init__(self):
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")

    @property
    def x_min(self) -> float:
        return self.center_x - self.half_extent

    @property
    def y_min(self) -> float:
        return self.center_y - self.half_extent

    @property
    def size(self) -> float:
        return 2.0 * self.half_extent


@dataclass
class RangeScan:
    """Beam x azimuth grid; ``index[r, c]`` is a row into ``cloud`` or -1 when empty."""

    rows: int
    cols: int
    index: np.ndarray
    cloud: PointCloud
    collisions: int = 0

    @property
    def valid(self) -> np.ndarray:
        return self.index >= 0

    def filled(self) -> int:
        return int(np.count_nonzero(self.index >= 0))


def _parse_row(fields: list, lineno: int, rows: int):
    if len(fields) not in (5, 6):
        raise CloudFormatError(f"expected 5 or 6 fields, got {len(fields)}", lineno)
    try:
        x, y, z = (float(v) for v in fields[:3])
        beam = int(fields[3])
        step = int(fields[4])
        label = int(fields[5]) if len(fields) == 6 else None
    except ValueError as exc:
        raise CloudFormatError(str(exc), lineno) from None
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise CloudFormatError("non-finite coordinate", lineno)
    if not 0 <= beam < rows:
        raise CloudFormatError(f"beam out of range: {beam} (rows={rows})", lineno)
    if step < 0:
        raise CloudFormatError(f"negative azimuth_step: {step}", lineno)
    if label is not None and label not in (0, 1):
        raise CloudFormatError(f"label must be 0 or 1, got {label}", lineno)
    return x, y, z, beam, step, label


def load_cloud(path: Union[str, Path], format: str = "csv", rows: int = DEFAULT_ROWS) -> PointCloud:
    """Read ``x,y,z,beam,azimuth_step[,label]`` rows.

    A header is accepted on the first line when its first field is not
    numeric. ``point_id`` is the zero-based data-row index. Labels are kept
    only when every row carries one.
    """
    if format != "csv":
        raise ValueError(f"unsupported format: {format}")
    xyz, beams, steps, labels = [], [], [], []
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if lineno == 1:
                try:
                    float(fields[0])
                except ValueError:
                    continue
            x, y, z, beam, step, label = _parse_row(fields, lineno, rows)
            xyz.append((x, y, z))
            beams.append(beam)
            steps.append(step)
            labels.append(label)
    if not xyz:
        return PointCloud.empty()
    has_labels = all(v is not None for v in labels)
    return PointCloud(
        np.array(xyz),
        beams,
        steps,
        np.arange(len(xyz)),
        np.array(labels) if has_labels else None,
    )


def write_cloud(path: Union[str, Path], cloud: PointCloud, with_labels: bool = True) -> None:
    """Write the CSV format read by :func:`load_cloud` (header included)."""
    labelled = with_labels and cloud.label is not None
    header = "x,y,z,beam,azimuth_step" + (",label" if labelled else "")
    lines = [header]
    for i in range(len(cloud)):
        x, y, z = cloud.xyz[i]
        row = f"{x:.6f},{y:.6f},{z:.6f},{cloud.beam[i]},{cloud.azimuth_step[i]}"
        if labelled:
            row += f",{cloud.label[i]}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def crop_radius(cloud: PointCloud, radius: float) -> PointCloud:
    """Keep points whose horizontal distance is at most ``radius`` (inclusive)."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    r2 = cloud.xyz[:, 0] ** 2 + cloud.xyz[:, 1] ** 2
    return cloud[r2 <= radius * radius]


def grid_downsample(cloud: PointCloud, cell: float) -> PointCloud:
    """Keep the first point falling in each ``cell`` x ``cell`` horizontal square."""
    if not cell > 0:
        raise ValueError("cell must be positive")
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.xyz[:, :2] / cell).astype(np.int64)
    keys -= keys.min(axis=0)
    flat = keys[:, 0] * (int(keys[:, 1].max()) + 1) + keys[:, 1]
    # np.unique returns the first occurrence index of each distinct key
    _, first = np.unique(flat, return_index=True)
    return cloud[np.sort(first)]


def organize(cloud: PointCloud, rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS) -> RangeScan:
    """Place each point at ``(beam, azimuth_step)``; on collision the nearer return wins."""
    if len(cloud) and (cloud.beam.max() >= rows or cloud.azimuth_step.max() >= cols):
        raise ValueError("beam or azimuth_step outside the scan grid")
    if len(cloud) and (cloud.beam.min() < 0 or cloud.azimuth_step.min() < 0):
        raise ValueError("negative beam or azimuth_step")
    index = np.full((rows, cols), -1, dtype=np.int64)
    if len(cloud) == 0:
        return RangeScan(rows, cols, index, cloud, 0)
    flat = cloud.beam * cols + cloud.azimuth_step
    # sort by cell, then by range, so the first entry per cell is the nearest
    order = np.lexsort((cloud.ranges, flat))
    cells = flat[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = cells[1:] != cells[:-1]
    index.reshape(-1)[cells[first]] = order[first]
    collisions = len(cloud) - int(first.sum())
    return RangeScan(rows, cols, index, cloud, collisions)
