"""Detection settings and the flat ``key = value`` config file."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Union

from . import ransac, tangent
from .scan import DEFAULT_COLS, DEFAULT_ROWS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DetectConfig:
    # verification
    epsilon: float = ransac.DEFAULT_EPSILON
    delta_deg: float = ransac.DEFAULT_DELTA_DEG
    hypotheses: int = ransac.DEFAULT_HYPOTHESES
    max_tilt_deg: float = ransac.DEFAULT_MAX_TILT_DEG  # <= 0 disables the gate
    # partition search
    grid_size: int = 80
    min_quadrant_inliers: int = 50
    # preprocessing
    crop_radius: float = 40.0
    downsample: float = 0.1
    rows: int = DEFAULT_ROWS
    cols: int = DEFAULT_COLS
    # tangents
    max_gap: int = tangent.DEFAULT_MAX_GAP
    max_chord: float = tangent.DEFAULT_MAX_CHORD
    tangent_support: float = tangent.DEFAULT_SUPPORT
    # LPR baseline
    lpr_segments: int = 3
    lpr_iterations: int = 3
    lpr_count: int = 20
    lpr_seed_margin: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.delta_deg < 90:
            raise ConfigError("delta_deg must lie in (0, 90)")
        if self.hypotheses < 1:
            raise ConfigError("hypotheses must be >= 1")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.min_quadrant_inliers < 0:
            raise ConfigError("min_quadrant_inliers must be >= 0")
        if not (self.crop_radius > 0 and self.downsample > 0):
            raise ConfigError("crop_radius and downsample must be positive")
        if min(self.lpr_segments, self.lpr_iterations, self.lpr_count) < 1:
            raise ConfigError("LPR counts must be positive")

    @property
    def delta(self) -> float:
        return math.radians(self.delta_deg)

    @property
    def max_tilt(self):
        return math.radians(self.max_tilt_deg) if self.max_tilt_deg > 0 else None

    @property
    def verify_params(self) -> "ransac.VerifyParams":
        return ransac.VerifyParams(self.epsilon, self.delta)

    def updated(self, **overrides) -> "DetectConfig":
        """Copy with the non-``None`` overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


_TYPES = {f.name: f.type for f in fields(DetectConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind in ("int", int):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config(text: str) -> Dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Dashes in keys map to underscores."""
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def load_config(path: Union[str, Path, None], base: DetectConfig = DetectConfig()) -> DetectConfig:
    if path is None:
        return base
    values = parse_config(Path(path).read_text(encoding="utf-8"))
    return replace(base, **values)


def from_mapping(values: Mapping[str, Any]) -> DetectConfig:
    return DetectConfig(**{k: v for k, v in values.items() if k in _TYPES})
