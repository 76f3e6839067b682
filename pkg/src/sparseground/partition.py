"""Disjoint four-plane ground fitting over a cross-shaped partition.

Every hypothesis' inliers are counted per horizontal bin and turned into a
summed-area table, so the inlier count of any bin-aligned rectangle costs
four lookups. A cross (one cut along x, one along y, both on bin
boundaries) splits the square into four quadrants; for each cross the best
hypothesis is picked per quadrant independently, and the cross with the
largest total wins, provided every quadrant keeps at least ``T`` inliers.

Grid arrays are indexed ``[c, r]`` with ``c`` the bin along x and ``r``
along y. Quadrants are ordered NW, NE, SW, SE::

    NW = (0, 0)..(c-1, r-1)    NE = (c, 0)..(B-1, r-1)
    SW = (0, r)..(c-1, B-1)    SE = (c, r)..(B-1, B-1)
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DetectConfig
from .ransac import (
    PlaneHypothesis,
    VerifyParams,
    hypothesis_masks,
    sample_hypotheses,
    stack_planes,
    tangent_masks,
)
from .scan import CloudBounds, PointCloud, crop_radius, grid_downsample, organize
from .tangent import TangentField, estimate_tangents

log = logging.getLogger(__name__)

QUADRANTS = ("NW", "NE", "SW", "SE")


@dataclass
class BinGrid:
    counts: np.ndarray
    bounds: CloudBounds

    @property
    def size(self) -> int:
        return self.counts.shape[0]


@dataclass
class InlierIntegral:
    """Inclusive 2-D prefix sums: ``table[c, r] = sum(counts[:c+1, :r+1])``."""

    table: np.ndarray

    @property
    def total(self) -> int:
        return int(self.table[-1, -1])


@dataclass(frozen=True)
class PartitionResult:
    cross_center: Tuple[int, int]
    plane_index: Tuple[int, int, int, int]
    quadrant_inliers: Tuple[int, int, int, int]
    best_sum: int


@dataclass
class GroundLabeling:
    """Per-point ground flags for the points the detector was run on."""

    point_id: np.ndarray
    ground: np.ndarray
    method: str
    planes: List[PlaneHypothesis] = field(default_factory=list)
    result: Optional[PartitionResult] = None
    bounds: Optional[CloudBounds] = None
    grid_size: Optional[int] = None
    quadrant: Optional[np.ndarray] = None
    tangents: Optional[TangentField] = None
    info: Dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.point_id)

    @property
    def ground_count(self) -> int:
        return int(np.count_nonzero(self.ground))


# --------------------------------------------------------------------------
# binning and summed-area tables

def bin_index(xyz: np.ndarray, bounds: CloudBounds, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Bin coordinates ``(c, r)``; cells are half-open, out-of-bounds points clamp to the edge bins."""
    cell = bounds.size / size
    c = np.floor((xyz[:, 0] - bounds.x_min) / cell)
    r = np.floor((xyz[:, 1] - bounds.y_min) / cell)
    return (
        np.clip(c, 0, size - 1).astype(np.int64),
        np.clip(r, 0, size - 1).astype(np.int64),
    )


def bin_inliers(cloud: PointCloud, mask: np.ndarray, bounds: CloudBounds, size: int = 80) -> BinGrid:
    if size < 2:
        raise ValueError("grid size must be at least 2")
    c, r = bin_index(cloud.xyz[mask], bounds, size)
    counts = np.bincount(c * size + r, minlength=size * size).reshape(size, size)
    return BinGrid(counts.astype(np.int64), bounds)


def integral_image(grid: Union[BinGrid, np.ndarray]) -> InlierIntegral:
    counts = grid.counts if isinstance(grid, BinGrid) else np.asarray(grid)
    return InlierIntegral(counts.cumsum(axis=0).cumsum(axis=1))


def rect_sum(integral: Union[InlierIntegral, np.ndarray], c0: int, r0: int, c1: int, r1: int) -> int:
    """Sum of bin counts over the inclusive rectangle ``(c0, r0)..(c1, r1)``."""
    table = integral.table if isinstance(integral, InlierIntegral) else np.asarray(integral)
    size_c, size_r = table.shape
    if not (0 <= c0 <= c1 < size_c and 0 <= r0 <= r1 < size_r):
        raise ValueError(f"invalid rectangle ({c0}, {r0})-({c1}, {r1})")
    total = table[c1, r1]
    if c0 > 0:
        total -= table[c0 - 1, r1]
    if r0 > 0:
        total -= table[c1, r0 - 1]
    if c0 > 0 and r0 > 0:
        total += table[c0 - 1, r0 - 1]
    return int(total)


def quadrant_rects(c: int, r: int, size: int) -> List[Tuple[int, int, int, int]]:
    """Inclusive ``(c0, r0, c1, r1)`` rectangles for the cross at ``(c, r)``, NW/NE/SW/SE."""
    last = size - 1
    return [
        (0, 0, c - 1, r - 1),
        (c, 0, last, r - 1),
        (0, r, c - 1, last),
        (c, r, last, last),
    ]


def build_integrals(xyz: np.ndarray, masks: np.ndarray, bounds: CloudBounds, size: int) -> np.ndarray:
    """Summed-area tables of all hypotheses at once, shape ``(M, B, B)``.

    Each hypothesis gets its own zeroed count grid.
    """
    c, r = bin_index(xyz, bounds, size)
    cells = c * size + r
    m_idx, p_idx = np.nonzero(masks)
    flat = m_idx * (size * size) + cells[p_idx]
    counts = np.bincount(flat, minlength=len(masks) * size * size)
    counts = counts.reshape(len(masks), size, size)
    return counts.cumsum(axis=1).cumsum(axis=2)


def _as_stack(integrals) -> np.ndarray:
    if isinstance(integrals, np.ndarray):
        return integrals if integrals.ndim == 3 else integrals[None]
    return np.stack([i.table if isinstance(i, InlierIntegral) else np.asarray(i) for i in integrals])


def cross_search(integrals, min_inliers: int = 50) -> Optional[PartitionResult]:
    """Best cross center and per-quadrant hypotheses, or ``None`` when infeasible.

    ``integrals`` is a sequence of :class:`InlierIntegral` or an ``(M, B, B)``
    array. Centers run over ``1 <= c, r <= B-1`` so no quadrant is empty.
    Ties go to the smallest ``(r, c)`` and then to the lowest hypothesis
    index in each quadrant.
    """
    tables = _as_stack(integrals)
    n_hyp, size, _ = tables.shape
    if n_hyp < 1:
        raise ValueError("need at least one hypothesis")
    # hypotheses on the last axis so the per-quadrant argmax runs over contiguous memory
    padded = np.zeros((size + 1, size + 1, n_hyp), dtype=np.int64)
    padded[1:, 1:] = np.moveaxis(tables, 0, -1)
    # corner[c-1, r-1, m] = P[c, r]: inliers strictly west and north of the cut
    corner = padded[1:size, 1:size]
    west = padded[1:size, size][:, None]
    north = padded[size, 1:size][None]
    total = padded[size, size]
    best_m = np.empty((4, size - 1, size - 1), dtype=np.int64)
    best_v = np.empty((4, size - 1, size - 1), dtype=np.int64)
    for s in range(4):
        if s == 0:
            q = corner
        elif s == 1:
            q = north - corner
        elif s == 2:
            q = west - corner
        else:
            q = total - west - north + corner
        best_m[s] = np.argmax(q, axis=2)
        best_v[s] = np.take_along_axis(q, best_m[s][..., None], axis=2)[..., 0]
    sums = best_v.sum(axis=0)
    feasible = best_v.min(axis=0) >= min_inliers
    if not feasible.any():
        return None
    score = np.where(feasible, sums, -1)
    # row-major over (r, c) so argmax picks the smallest r, then c
    flat = int(np.argmax(score.T))
    r = flat // (size - 1) + 1
    c = flat % (size - 1) + 1
    return PartitionResult(
        (c, r),
        tuple(int(v) for v in best_m[:, c - 1, r - 1]),
        tuple(int(v) for v in best_v[:, c - 1, r - 1]),
        int(sums[c - 1, r - 1]),
    )


def quadrant_of(xyz: np.ndarray, center: Tuple[int, int], bounds: CloudBounds, size: int) -> np.ndarray:
    c, r = bin_index(xyz, bounds, size)
    return 2 * (r >= center[1]).astype(np.int64) + (c >= center[0]).astype(np.int64)


def label_ground(
    cloud: PointCloud,
    tangents: TangentField,
    hypotheses: Sequence[PlaneHypothesis],
    result: PartitionResult,
    bounds: CloudBounds,
    size: int,
    params: VerifyParams = VerifyParams(),
) -> GroundLabeling:
    """Check each point against the plane of the quadrant it falls in, and only that plane."""
    quadrant = quadrant_of(cloud.xyz, result.cross_center, bounds, size)
    planes = [hypotheses[m] for m in result.plane_index]
    normals, offsets = stack_planes(planes)
    n = normals[quadrant]
    dist = np.einsum("ij,ij->i", n, cloud.xyz) + offsets[quadrant]
    t = tangents.lookup(cloud.point_id)
    with np.errstate(invalid="ignore"):
        u = np.abs(np.einsum("ij,ij->i", n, t))
        ground = (np.abs(dist) < params.epsilon) & (u < np.sin(params.delta))
    return GroundLabeling(cloud.point_id.copy(), ground, "proposed", planes, result, bounds, size, quadrant)


def _single_plane_labeling(cloud, tangents, plane, params, method):
    n, d = stack_planes([plane])
    ground = tangent_masks(n, d, cloud.xyz, tangents.lookup(cloud.point_id), params.epsilon, params.delta)[0]
    return GroundLabeling(cloud.point_id.copy(), ground, method, [plane])


def detect_ground(cloud: PointCloud, config: DetectConfig = DetectConfig()) -> GroundLabeling:
    """Full pipeline on one frame.

    Tangents come from the complete organized scan; hypotheses and the
    partition are fit on the cropped, downsampled subset; labels cover every
    point of the cropped full-resolution cloud.
    """
    scan = organize(cloud, config.rows, config.cols)
    tangents = estimate_tangents(scan, config.max_gap, config.max_chord, config.tangent_support)
    cropped = crop_radius(cloud, config.crop_radius)
    fit = grid_downsample(cropped, config.downsample)
    hypotheses = sample_hypotheses(fit, config.hypotheses, config.max_tilt, config.seed)
    params = config.verify_params
    masks = hypothesis_masks(hypotheses, fit, tangents, params)
    bounds = CloudBounds(0.0, 0.0, config.crop_radius)
    integrals = build_integrals(fit.xyz, masks, bounds, config.grid_size)
    result = cross_search(integrals, config.min_quadrant_inliers)
    if result is None:
        best = int(np.argmax(masks.sum(axis=1)))
        log.warning("no cross partition keeps %d inliers per quadrant; falling back to a single plane",
                    config.min_quadrant_inliers)
        labeling = _single_plane_labeling(cropped, tangents, hypotheses[best], params, "proposed")
        labeling.info["fallback"] = True
        labeling.info["single_plane_index"] = best
        labeling.info["single_plane_inliers"] = int(masks[best].sum())
    else:
        labeling = label_ground(cropped, tangents, hypotheses, result, bounds, config.grid_size, params)
        labeling.info["fallback"] = False
    labeling.bounds = bounds
    labeling.grid_size = config.grid_size
    labeling.tangents = tangents
    labeling.info["fit_points"] = len(fit)
    return labeling


# --------------------------------------------------------------------------
# serialization

def write_labeling(path: Union[str, Path], labeling: GroundLabeling, config: Optional[DetectConfig] = None) -> Path:
    """Write ``point_id,ground`` rows plus a JSON sidecar next to them.

    Returns the sidecar path (``<path>.json``).
    """
    path = Path(path)
    order = np.argsort(labeling.point_id, kind="stable")
    lines = ["point_id,ground"]
    lines += [f"{pid},{int(g)}" for pid, g in zip(labeling.point_id[order], labeling.ground[order])]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(sidecar_dict(labeling, config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def sidecar_dict(labeling: GroundLabeling, config: Optional[DetectConfig] = None) -> dict:
    out: dict = {
        "method": labeling.method,
        "points": len(labeling),
        "ground_points": labeling.ground_count,
        "planes": [{"normal": list(p.normal), "d": p.d} for p in labeling.planes],
    }
    for key, value in labeling.info.items():
        if isinstance(value, (bool, int, float, str, list)) or value is None:
            out[key] = value
    res = labeling.result
    if res is not None:
        bounds, size = labeling.bounds, labeling.grid_size
        cell = bounds.size / size
        out["partition"] = {
            "cross_center_bins": list(res.cross_center),
            "cross_center_m": [bounds.x_min + res.cross_center[0] * cell, bounds.y_min + res.cross_center[1] * cell],
            "quadrants": list(QUADRANTS),
            "plane_index": list(res.plane_index),
            "quadrant_inliers": list(res.quadrant_inliers),
            "best_sum": res.best_sum,
        }
    if config is not None:
        out["config"] = config.as_dict()
    return out


def read_labeling(path: Union[str, Path]) -> GroundLabeling:
    ids, flags = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or (lineno == 1 and line.startswith("point_id")):
                continue
            try:
                pid, g = line.split(",")
                ids.append(int(pid))
                flags.append(int(g) != 0)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: expected point_id,ground") from None
    return GroundLabeling(np.array(ids, dtype=np.int64), np.array(flags, dtype=bool), "file")
