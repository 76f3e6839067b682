"""Synthetic spinning-lidar raycaster producing labeled clouds.

Scenes are built from finite planar patches (ground and ramps), boxes and
vertical walls. Every ray of a 16-beam sensor is intersected with every
element; the nearest hit within range becomes a point labeled by the hit
element's ``is_ground`` flag.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from .scan import PointCloud

VLP16_ELEVATIONS = tuple(float(e) for e in range(-15, 16, 2))
MAX_GROUND_SLOPE_DEG = 30.0


@dataclass(frozen=True)
class LidarConfig:
    beam_elevations: Tuple[float, ...] = VLP16_ELEVATIONS
    azimuth_resolution: float = 0.2
    sensor_height: float = 1.8
    max_range: float = 100.0
    noise_sigma: float = 0.01

    def __post_init__(self):
        if not self.azimuth_resolution > 0:
            raise ValueError("azimuth_resolution must be positive")
        elev = np.asarray(self.beam_elevations, dtype=float)
        if len(elev) == 0 or np.any(np.diff(elev) <= 0):
            raise ValueError("beam_elevations must be strictly increasing")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def rows(self) -> int:
        return len(self.beam_elevations)

    @property
    def cols(self) -> int:
        return int(round(360.0 / self.azimuth_resolution))

    @property
    def origin(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.sensor_height])

    def ray_directions(self) -> np.ndarray:
        """Unit directions, shape ``(rows * cols, 3)``, beam-major then azimuth."""
        elev = np.radians(np.asarray(self.beam_elevations, dtype=float))[:, None]
        az = np.radians(np.arange(self.cols) * self.azimuth_resolution)[None, :]
        dirs = np.stack(
            np.broadcast_arrays(np.cos(elev) * np.cos(az), np.cos(elev) * np.sin(az), np.sin(elev)),
            axis=-1,
        )
        return dirs.reshape(-1, 3)


@dataclass(frozen=True)
class PlanePatch:
    """Plane ``normal . p + offset = 0`` clipped to a horizontal rectangle.

    ``kind`` is ``"ground_plane"`` or ``"ramp"``; both are the same geometry.
    """

    normal: Tuple[float, float, float]
    offset: float
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    is_ground: bool = True
    kind: str = "ground_plane"

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane normal must be non-zero")
        if n[2] < 0:
            n, off = -n, -self.offset
        else:
            off = self.offset
        object.__setattr__(self, "normal", tuple(float(v) for v in n / norm))
        object.__setattr__(self, "offset", float(off / norm))

    @classmethod
    def from_gradient(
        cls,
        height: float,
        gradient: Tuple[float, float],
        x_range,
        y_range,
        anchor: Tuple[float, float] = (0.0, 0.0),
        is_ground: bool = True,
        kind: str = "ground_plane",
    ) -> "PlanePatch":
        """Surface ``z = height + gx (x - ax) + gy (y - ay)``."""
        gx, gy = gradient
        ax, ay = anchor
        # -gx x - gy y + z + (gx ax + gy ay - height) = 0
        return cls((-gx, -gy, 1.0), gx * ax + gy * ay - height, tuple(x_range), tuple(y_range), is_ground, kind)

    @property
    def slope_deg(self) -> float:
        return math.degrees(math.acos(min(1.0, abs(self.normal[2]))))

    def height_at(self, x, y):
        nx, ny, nz = self.normal
        return -(nx * np.asarray(x) + ny * np.asarray(y) + self.offset) / nz

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal)
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -(origin @ n + self.offset) / denom
            hit = origin + t[:, None] * dirs
        ok = (
            (t > 0)
            & np.isfinite(t)
            & (hit[:, 0] >= self.x_range[0])
            & (hit[:, 0] <= self.x_range[1])
            & (hit[:, 1] >= self.y_range[0])
            & (hit[:, 1] <= self.y_range[1])
        )
        return np.where(ok, t, np.inf)


@dataclass(frozen=True)
class Box:
    """Box with corners ``lo``/``hi`` in its own frame, rotated by ``yaw_deg`` about its vertical center axis."""

    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]
    yaw_deg: float = 0.0
    is_ground: bool = False
    kind: str = "box"

    def __post_init__(self):
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box hi must exceed lo on every axis")

    @property
    def center_xy(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo[:2]) + np.asarray(self.hi[:2]))

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        c = np.append(self.center_xy, 0.0)
        yaw = math.radians(self.yaw_deg)
        cs, sn = math.cos(yaw), math.sin(yaw)
        # world -> box frame rotation (inverse yaw) about the box center
        rot = np.array([[cs, sn, 0.0], [-sn, cs, 0.0], [0.0, 0.0, 1.0]])
        o = rot @ (origin - c) + c
        d = dirs @ rot.T
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - o) / d
            t2 = (hi - o) / d
        tmin = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2))
        tmax = np.where(np.isnan(t1), np.inf, np.maximum(t1, t2))
        t_near = tmin.max(axis=1)
        t_far = tmax.min(axis=1)
        ok = (t_near <= t_far) & (t_far > 0)
        t = np.where(t_near > 0, t_near, t_far)
        return np.where(ok, t, np.inf)


@dataclass(frozen=True)
class Wall:
    """Vertical rectangle over the segment ``start``-``end`` between ``z_range`` heights."""

    start: Tuple[float, float]
    end: Tuple[float, float]
    z_range: Tuple[float, float]
    is_ground: bool = False
    kind: str = "wall"

    def __post_init__(self):
        if np.allclose(self.start, self.end):
            raise ValueError("wall segment must have non-zero length")
        if self.z_range[1] <= self.z_range[0]:
            raise ValueError("wall z_range must be increasing")

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        p0 = np.asarray(self.start, dtype=float)
        seg = np.asarray(self.end, dtype=float) - p0
        n = np.array([-seg[1], seg[0]])
        denom = dirs[:, :2] @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((p0 - origin[:2]) @ n) / denom
            hit = origin + t[:, None] * dirs
            u = ((hit[:, :2] - p0) @ seg) / (seg @ seg)
        ok = (
            (t > 0)
            & np.isfinite(t)
            & (u >= 0)
            & (u <= 1)
            & (hit[:, 2] >= self.z_range[0])
            & (hit[:, 2] <= self.z_range[1])
        )
        return np.where(ok, t, np.inf)


SceneElement = Union[PlanePatch, Box, Wall]


@dataclass(frozen=True)
class Scene:
    elements: Tuple[SceneElement, ...]
    name: str = "scene"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise ValueError("scene has no elements")
        if not any(e.is_ground for e in self.elements):
            raise ValueError("scene needs at least one ground element")
        for e in self.elements:
            if e.is_ground:
                if not isinstance(e, PlanePatch):
                    raise ValueError(f"ground element must be planar, got {e.kind}")
                if e.slope_deg > MAX_GROUND_SLOPE_DEG + 1e-9:
                    raise ValueError(f"ground slope {e.slope_deg:.1f} deg exceeds {MAX_GROUND_SLOPE_DEG}")

    def ground_elements(self) -> List[SceneElement]:
        return [e for e in self.elements if e.is_ground]


@dataclass
class SimulatedScan:
    """Raycast output; ``element`` is the index of the hit scene element per point."""

    cloud: PointCloud
    element: np.ndarray
    scene: Scene
    config: LidarConfig


def raycast_scan(scene: Scene, config: LidarConfig = LidarConfig(), seed: int = 0) -> SimulatedScan:
    """Cast every (beam, azimuth) ray; keep nearest hits within ``max_range``.

    Range noise is drawn for all rays up front, so the random stream does not
    depend on which rays hit.
    """
    origin = config.origin
    dirs = config.ray_directions()
    t_all = np.stack([e.intersect(origin, dirs) for e in scene.elements])
    nearest = np.argmin(t_all, axis=0)
    t = t_all[nearest, np.arange(len(dirs))]
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, config.noise_sigma, size=len(dirs)) if config.noise_sigma > 0 else np.zeros(len(dirs))
    hit = np.isfinite(t) & (t <= config.max_range)
    idx = np.flatnonzero(hit)
    rng_t = t[idx] + noise[idx]
    xyz = origin + rng_t[:, None] * dirs[idx]
    beam = idx // config.cols
    step = idx % config.cols
    element = nearest[idx]
    ground_flags = np.array([e.is_ground for e in scene.elements], dtype=np.int8)
    cloud = PointCloud(xyz, beam, step, np.arange(len(idx)), ground_flags[element])
    return SimulatedScan(cloud, element, scene, config)


def raycast(scene: Scene, config: LidarConfig = LidarConfig(), seed: int = 0) -> PointCloud:
    return raycast_scan(scene, config, seed).cloud


# --------------------------------------------------------------------------
# canonical scenes

def _ground(height=0.0, gradient=(0.0, 0.0), x=(-60.0, 60.0), y=(-60.0, 60.0), anchor=(0.0, 0.0), kind="ground_plane"):
    return PlanePatch.from_gradient(height, gradient, x, y, anchor=anchor, kind=kind)


def _grade(deg: float) -> float:
    return math.tan(math.radians(deg))


def _car(x, y, yaw=0.0, length=4.5, width=1.8, height=1.5, base=0.0):
    return Box((x - length / 2, y - width / 2, base), (x + length / 2, y + width / 2, base + height), yaw)


def canonical_scenes() -> Dict[str, Scene]:
    scenes = {}

    scenes["flat"] = Scene((_ground(),), "flat")

    # flat street between building facades with parked cars; close to a
    # real urban frame in point count
    scenes["urban"] = Scene(
        (
            _ground(),
            Wall((-45.0, 14.0), (45.0, 14.0), (0.0, 15.0)),
            Wall((-45.0, -12.0), (45.0, -12.0), (0.0, 15.0)),
            Wall((38.0, -12.0), (38.0, 14.0), (0.0, 15.0)),
            Wall((-38.0, -12.0), (-38.0, 14.0), (0.0, 15.0)),
            _car(9.0, 5.0, base=0.3),
            _car(-11.0, 5.2, base=0.3),
            _car(18.0, -5.0, yaw=4.0, base=0.3),
            _car(-20.0, -5.5, base=0.3),
            Box((6.0, 10.5, 0.0), (7.0, 11.5, 3.0)),
        ),
        "urban",
    )

    # cross-section of flat ground folding into a down-slope on one side and
    # a facade close by on the other, extruded along x; the near wall makes
    # its base rings steep enough for the tangent test to reject
    fold_y, slope, wall_y = -6.0, 8.0, 3.5
    scenes["two_slope_wall"] = Scene(
        (
            _ground(y=(fold_y, wall_y)),
            _ground(gradient=(0.0, _grade(slope)), y=(-60.0, fold_y), anchor=(0.0, fold_y), kind="ramp"),
            Wall((-60.0, wall_y), (60.0, wall_y), (-1.0, 6.0)),
        ),
        "two_slope_wall",
    )

    # flat road; the lanes ahead and to the left climb an on-ramp
    ramp_x, ramp_y = 4.0, 2.0
    scenes["sloped_lane"] = Scene(
        (
            _ground(y=(-60.0, ramp_y)),
            _ground(x=(-60.0, ramp_x), y=(ramp_y, 60.0)),
            _ground(gradient=(_grade(8.0), 0.0), x=(ramp_x, 60.0), y=(ramp_y, 60.0), anchor=(ramp_x, 0.0), kind="ramp"),
        ),
        "sloped_lane",
    )

    # road climbing through the sensor position onto a plateau, with a car
    # parked on the plateau about 35 m out; extending the climb outward
    # passes through the car body
    knee, climb = 8.0, _grade(2.4)
    scenes["far_obstacle"] = Scene(
        (
            _ground(gradient=(climb, 0.0), x=(-60.0, knee), kind="ramp"),
            _ground(height=knee * climb, x=(knee, 60.0)),
            _car(37.25, 1.0, base=knee * climb),
        ),
        "far_obstacle",
    )

    # traffic jam: most of the ground is occluded by vehicles
    grade = _grade(1.0)
    cars = []
    for lane_y in (-6.5, -3.2, 3.2, 6.5):
        for k, x in enumerate(np.arange(-34.0, 36.0, 6.0)):
            if abs(x) < 4.0 and abs(lane_y) < 4.0:
                continue
            base = grade * x + 0.3  # ground clearance under the body
            cars.append(_car(float(x), lane_y + 0.2 * ((k % 3) - 1), yaw=2.0 * ((k % 2) - 0.5), height=1.5 + 0.3 * (k % 2), base=base))
    scenes["crowded"] = Scene(
        (_ground(gradient=(grade, 0.0)),)
        + tuple(cars)
        + (Wall((-60.0, 10.0), (60.0, 10.0), (0.0, 4.0)), Wall((-60.0, -10.0), (60.0, -10.0), (0.0, 4.0))),
        "crowded",
    )

    # low fences along the road edges; the ground beyond them is hidden
    scenes["low_fence"] = Scene(
        (
            _ground(),
            Wall((-60.0, 8.0), (60.0, 8.0), (0.0, 0.6)),
            Wall((-60.0, -8.0), (60.0, -8.0), (0.0, 0.6)),
            Wall((15.0, 8.0), (15.0, 30.0), (0.0, 0.8)),
        ),
        "low_fence",
    )

    # road with a lateral roll, stepping down to a lower shoulder on one side
    roll = _grade(2.0)
    scenes["tilted_ground"] = Scene(
        (
            _ground(gradient=(0.0, roll), y=(-6.0, 60.0)),
            _ground(height=-0.8, gradient=(0.0, roll), y=(-60.0, -6.0), anchor=(0.0, -6.0), kind="ground_plane"),
        ),
        "tilted_ground",
    )
    return scenes


# --------------------------------------------------------------------------
# scene files

def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _element_from_section(name: str, sec: configparser.SectionProxy) -> SceneElement:
    kind = sec.get("kind", "").strip()
    if kind in ("ground_plane", "ramp"):
        is_ground = sec.getboolean("is_ground", True)
        x_range = _floats(sec["x_range"])
        y_range = _floats(sec["y_range"])
        if "normal" in sec:
            return PlanePatch(_floats(sec["normal"]), float(sec.get("offset", "0")), x_range, y_range, is_ground, kind)
        gradient = _floats(sec.get("gradient", "0, 0"))
        anchor = _floats(sec.get("anchor", "0, 0"))
        return PlanePatch.from_gradient(float(sec.get("height", "0")), gradient, x_range, y_range, anchor, is_ground, kind)
    if kind == "box":
        return Box(_floats(sec["min"]), _floats(sec["max"]), float(sec.get("yaw_deg", "0")), sec.getboolean("is_ground", False))
    if kind == "wall":
        return Wall(_floats(sec["start"]), _floats(sec["end"]), _floats(sec["z_range"]), sec.getboolean("is_ground", False))
    raise ValueError(f"[{name}]: unknown element kind {kind!r}")


def parse_scene(text: str, name: str = "scene") -> Scene:
    """Parse an INI-style scene description.

    Each ``[element.<id>]`` section is one element, in file order::

        [scene]
        name = ramp_demo

        [element.road]
        kind = ground_plane        ; ground_plane | ramp | box | wall
        x_range = -50, 50
        y_range = -50, 50
        height = 0                 ; or: normal = nx, ny, nz / offset = d
        gradient = 0.05, 0         ; dz/dx, dz/dy
        anchor = 10, 0             ; where z == height

        [element.car]
        kind = box
        min = 10, -1, 0
        max = 14.5, 0.8, 1.5
        yaw_deg = 0

        [element.fence]
        kind = wall
        start = -40, 8
        end = 40, 8
        z_range = 0, 0.6

    ``is_ground`` defaults to true for planar kinds and false otherwise.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read_string(text)
    if parser.has_section("scene"):
        name = parser["scene"].get("name", name)
    elements = []
    for section in parser.sections():
        if section.startswith("element"):
            try:
                elements.append(_element_from_section(section, parser[section]))
            except KeyError as exc:
                raise ValueError(f"[{section}]: missing key {exc}") from None
    return Scene(tuple(elements), name)


def load_scene(path: Union[str, Path]) -> Scene:
    path = Path(path)
    return parse_scene(path.read_text(encoding="utf-8"), name=path.stem)
