"""Plane hypotheses and inlier verification.

Two predicates decide whether point ``i`` supports plane ``(n, d)``:

* distance only:  ``|n . x_i + d| < epsilon``
* distance and tangent: additionally the beam tangent ``t_i`` must be close
  to perpendicular to ``n``, ``|pi/2 - arccos(n . t_i)| < delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .scan import PointCloud
from .tangent import TangentField

DEFAULT_EPSILON = 0.2
DEFAULT_DELTA_DEG = 10.0
DEFAULT_HYPOTHESES = 200
DEFAULT_MAX_TILT_DEG = 45.0
COLLINEAR_TOL = 1e-6
MAX_ATTEMPTS_PER_HYPOTHESIS = 100


class HypothesisError(RuntimeError):
    """Not enough non-degenerate point triples to build the requested hypotheses."""


@dataclass(frozen=True)
class PlaneHypothesis:
    """Plane ``normal . x + d = 0`` with a unit, upward-facing normal."""

    normal: Tuple[float, float, float]
    d: float

    @classmethod
    def from_coefficients(cls, normal, d: float) -> "PlaneHypothesis":
        n = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane normal must be non-zero")
        n, d = n / norm, d / norm
        if _flip_needed(n):
            n, d = -n, -d
        return cls(tuple(float(v) for v in n), float(d))

    @property
    def tilt(self) -> float:
        """Angle between the normal and the vertical axis, in radians."""
        return math.acos(min(1.0, abs(self.normal[2])))

    def distance(self, xyz: np.ndarray) -> np.ndarray:
        """Signed point-plane distance."""
        return np.asarray(xyz) @ np.asarray(self.normal) + self.d


def _flip_needed(n: np.ndarray) -> bool:
    if n[2] != 0:
        return n[2] < 0
    nz = np.flatnonzero(n)
    return bool(n[nz[0]] < 0)


@dataclass(frozen=True)
class VerifyParams:
    epsilon: float = DEFAULT_EPSILON
    delta: float = math.radians(DEFAULT_DELTA_DEG)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < math.pi / 2:
            raise ValueError("delta must lie in (0, pi/2)")


def stack_planes(planes: Sequence[PlaneHypothesis]) -> Tuple[np.ndarray, np.ndarray]:
    """``(M, 3)`` normals and ``(M,)`` offsets."""
    normals = np.array([p.normal for p in planes], dtype=float).reshape(-1, 3)
    offsets = np.array([p.d for p in planes], dtype=float)
    return normals, offsets


def _planes_from_triples(a, b, c):
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1)
    scale = np.linalg.norm(b - a, axis=1) * np.linalg.norm(c - a, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = norm > COLLINEAR_TOL * scale
        n = n / norm[:, None]
    return n, ok


def sample_hypotheses(
    cloud: PointCloud,
    count: int = DEFAULT_HYPOTHESES,
    max_tilt: Optional[float] = math.radians(DEFAULT_MAX_TILT_DEG),
    seed: int = 0,
) -> List[PlaneHypothesis]:
    """Draw ``count`` planes through three distinct random points each.

    Collinear triples, and planes tilted more than ``max_tilt`` radians from
    horizontal (``None`` disables the gate), are redrawn. Raises
    :class:`HypothesisError` after ``100 * count`` draws without success.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    xyz = cloud.xyz
    n_pts = len(xyz)
    if n_pts < 3:
        raise HypothesisError(f"need at least 3 points, got {n_pts}")
    rng = np.random.default_rng(seed)
    budget = MAX_ATTEMPTS_PER_HYPOTHESIS * count
    cos_tilt = math.cos(max_tilt) if max_tilt is not None else -1.0
    planes: List[PlaneHypothesis] = []
    drawn = 0
    while len(planes) < count and drawn < budget:
        batch = min(max(2 * (count - len(planes)), 16), budget - drawn)
        idx = rng.integers(0, n_pts, size=(batch, 3))
        drawn += batch
        distinct = (idx[:, 0] != idx[:, 1]) & (idx[:, 0] != idx[:, 2]) & (idx[:, 1] != idx[:, 2])
        a, b, c = xyz[idx[:, 0]], xyz[idx[:, 1]], xyz[idx[:, 2]]
        normals, ok = _planes_from_triples(a, b, c)
        ok &= distinct
        ok[ok] &= np.abs(normals[ok, 2]) >= cos_tilt
        for row in np.flatnonzero(ok):
            n = normals[row]
            planes.append(PlaneHypothesis.from_coefficients(n, -float(n @ a[row])))
            if len(planes) == count:
                break
    if len(planes) < count:
        raise HypothesisError(f"only {len(planes)} of {count} valid hypotheses after {drawn} draws")
    return planes


def distance_masks(normals: np.ndarray, offsets: np.ndarray, xyz: np.ndarray, epsilon: float) -> np.ndarray:
    """``(M, N)`` distance-only inlier masks."""
    return np.abs(normals @ xyz.T + offsets[:, None]) < epsilon


def tangent_masks(
    normals: np.ndarray, offsets: np.ndarray, xyz: np.ndarray, tangents: np.ndarray, epsilon: float, delta: float
) -> np.ndarray:
    """``(M, N)`` distance-and-tangent inlier masks; NaN tangents never pass.

    ``|pi/2 - arccos(u)| = |arcsin(u)|`` and arcsin is increasing, so the
    angle test reduces to ``|u| < sin(delta)``.
    """
    near = distance_masks(normals, offsets, xyz, epsilon)
    with np.errstate(invalid="ignore"):
        u = np.abs(normals @ tangents.T)
        perpendicular = u < math.sin(delta)
    return near & perpendicular


def verify_distance(plane: PlaneHypothesis, cloud: PointCloud, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    n, d = stack_planes([plane])
    return distance_masks(n, d, cloud.xyz, epsilon)[0]


def verify_tangent(
    plane: PlaneHypothesis,
    cloud: PointCloud,
    tangents: TangentField,
    epsilon: float = DEFAULT_EPSILON,
    delta: float = math.radians(DEFAULT_DELTA_DEG),
) -> np.ndarray:
    n, d = stack_planes([plane])
    return tangent_masks(n, d, cloud.xyz, tangents.lookup(cloud.point_id), epsilon, delta)[0]


def hypothesis_masks(
    planes: Sequence[PlaneHypothesis],
    cloud: PointCloud,
    tangents: Optional[TangentField],
    params: VerifyParams,
) -> np.ndarray:
    """Masks of every hypothesis, tangent-verified when ``tangents`` is given."""
    normals, offsets = stack_planes(planes)
    if tangents is None:
        return distance_masks(normals, offsets, cloud.xyz, params.epsilon)
    return tangent_masks(normals, offsets, cloud.xyz, tangents.lookup(cloud.point_id), params.epsilon, params.delta)


def fit_single_plane(
    cloud: PointCloud,
    tangents: Optional[TangentField] = None,
    params: VerifyParams = VerifyParams(),
    count: int = DEFAULT_HYPOTHESES,
    seed: int = 0,
    max_tilt: Optional[float] = math.radians(DEFAULT_MAX_TILT_DEG),
) -> Tuple[PlaneHypothesis, np.ndarray]:
    """Best of ``count`` hypotheses by inlier count; ties go to the lowest index."""
    planes = sample_hypotheses(cloud, count, max_tilt, seed)
    masks = hypothesis_masks(planes, cloud, tangents, params)
    best = int(np.argmax(masks.sum(axis=1)))
    return planes[best], masks[best]
