"""Ground detection for sparse spinning-lidar scans.

Plane hypotheses are verified by point distance and by the direction of
each beam's local tangent, and up to four disjoint planes are fit over a
cross-shaped split of the ground found with summed-area tables.
"""

from .baselines import lpr_fit, tangent_ransac, vanilla_ransac
from .config import ConfigError, DetectConfig, load_config
from .evaluation import SegmentationMetrics, bench, bench_all, score
from .partition import (
    GroundLabeling,
    PartitionResult,
    build_integrals,
    cross_search,
    detect_ground,
    integral_image,
    rect_sum,
    write_labeling,
)
from .ransac import PlaneHypothesis, sample_hypotheses, verify_distance, verify_tangent
from .scan import CloudBounds, CloudFormatError, PointCloud, load_cloud, organize, write_cloud
from .simulate import LidarConfig, Scene, canonical_scenes, load_scene, raycast, raycast_scan
from .tangent import TangentField, estimate_tangents

__version__ = "0.1.0"

__all__ = [
    "CloudBounds",
    "CloudFormatError",
    "ConfigError",
    "DetectConfig",
    "GroundLabeling",
    "LidarConfig",
    "PartitionResult",
    "PlaneHypothesis",
    "PointCloud",
    "Scene",
    "SegmentationMetrics",
    "TangentField",
    "bench",
    "bench_all",
    "build_integrals",
    "canonical_scenes",
    "cross_search",
    "detect_ground",
    "estimate_tangents",
    "integral_image",
    "load_cloud",
    "load_config",
    "load_scene",
    "lpr_fit",
    "organize",
    "raycast",
    "raycast_scan",
    "rect_sum",
    "sample_hypotheses",
    "score",
    "tangent_ransac",
    "vanilla_ransac",
    "verify_distance",
    "verify_tangent",
    "write_cloud",
    "write_labeling",
]
