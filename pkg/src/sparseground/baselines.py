"""Comparison methods: one distance-verified RANSAC plane, and LPR-seeded fixed-partition fitting."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .config import DetectConfig
from .partition import GroundLabeling
from .ransac import PlaneHypothesis, fit_single_plane, verify_distance, verify_tangent
from .scan import PointCloud, crop_radius, grid_downsample, organize
from .tangent import estimate_tangents


def vanilla_ransac(cloud: PointCloud, config: DetectConfig = DetectConfig()) -> Tuple[PlaneHypothesis, GroundLabeling]:
    """Single plane over the whole cropped cloud; ground = distance inliers."""
    cropped = crop_radius(cloud, config.crop_radius)
    fit = grid_downsample(cropped, config.downsample)
    plane, _ = fit_single_plane(fit, None, config.verify_params, config.hypotheses, config.seed, config.max_tilt)
    ground = verify_distance(plane, cropped, config.epsilon)
    return plane, GroundLabeling(cropped.point_id.copy(), ground, "vanilla", [plane])


def tangent_ransac(cloud: PointCloud, config: DetectConfig = DetectConfig()) -> Tuple[PlaneHypothesis, GroundLabeling]:
    """Like :func:`vanilla_ransac`, but hypotheses are scored and points labeled with the tangent test too."""
    tangents = estimate_tangents(organize(cloud, config.rows, config.cols), config.max_gap, config.max_chord,
                                 config.tangent_support)
    cropped = crop_radius(cloud, config.crop_radius)
    fit = grid_downsample(cropped, config.downsample)
    plane, _ = fit_single_plane(fit, tangents, config.verify_params, config.hypotheses, config.seed, config.max_tilt)
    ground = verify_tangent(plane, cropped, tangents, config.epsilon, config.delta)
    labeling = GroundLabeling(cropped.point_id.copy(), ground, "tangent", [plane])
    labeling.tangents = tangents
    return plane, labeling


def fit_plane_lstsq(xyz: np.ndarray) -> PlaneHypothesis:
    """Orthogonal-regression plane: through the centroid, normal along the least principal axis."""
    centroid = xyz.mean(axis=0)
    _, _, vt = np.linalg.svd(xyz - centroid, full_matrices=False)
    normal = vt[-1]
    return PlaneHypothesis.from_coefficients(normal, -float(normal @ centroid))


def _lpr_slab(xyz: np.ndarray, config: DetectConfig) -> Optional[PlaneHypothesis]:
    if len(xyz) < 3:
        return None
    k = min(config.lpr_count, len(xyz))
    lowest = np.partition(xyz[:, 2], k - 1)[:k]
    seeds = xyz[xyz[:, 2] <= lowest.mean() + config.lpr_seed_margin]
    if len(seeds) < 3:
        return None
    ground = seeds
    plane = None
    for _ in range(config.lpr_iterations):
        if len(ground) < 3:
            break
        plane = fit_plane_lstsq(ground)
        ground = xyz[np.abs(plane.distance(xyz)) < config.epsilon]
    return plane


def slab_edges(config: DetectConfig) -> np.ndarray:
    return np.linspace(-config.crop_radius, config.crop_radius, config.lpr_segments + 1)


def lpr_fit(cloud: PointCloud, config: DetectConfig = DetectConfig()) -> GroundLabeling:
    """Fixed longitudinal slabs, each fit from its lowest point representatives.

    Per slab: the mean height of the ``lpr_count`` lowest points plus
    ``lpr_seed_margin`` selects seed points, then ``lpr_iterations`` rounds
    alternate a least-squares plane fit with re-selecting the points within
    ``epsilon`` of it. Slabs with fewer than three seeds get no ground.
    """
    cropped = crop_radius(cloud, config.crop_radius)
    fit = grid_downsample(cropped, config.downsample)
    edges = slab_edges(config)
    fit_slab = np.clip(np.searchsorted(edges, fit.xyz[:, 0], side="right") - 1, 0, config.lpr_segments - 1)
    out_slab = np.clip(np.searchsorted(edges, cropped.xyz[:, 0], side="right") - 1, 0, config.lpr_segments - 1)
    ground = np.zeros(len(cropped), dtype=bool)
    planes = []
    skipped = []
    for s in range(config.lpr_segments):
        plane = _lpr_slab(fit.xyz[fit_slab == s], config)
        if plane is None:
            skipped.append(s)
            continue
        planes.append(plane)
        sel = out_slab == s
        ground[sel] = np.abs(plane.distance(cropped.xyz[sel])) < config.epsilon
    labeling = GroundLabeling(cropped.point_id.copy(), ground, "lpr", planes)
    labeling.info["skipped_slabs"] = skipped
    return labeling
