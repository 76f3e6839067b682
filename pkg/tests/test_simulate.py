import math

import numpy as np
import pytest

from sparseground.simulate import (
    Box,
    LidarConfig,
    PlanePatch,
    Scene,
    Wall,
    canonical_scenes,
    parse_scene,
    raycast,
    raycast_scan,
)

FLAT = PlanePatch((0.0, 0.0, 1.0), 0.0, (-200.0, 200.0), (-200.0, 200.0))


def test_default_lidar_is_vlp16():
    cfg = LidarConfig()
    assert cfg.rows == 16 and cfg.cols == 1800
    assert cfg.beam_elevations[0] == -15.0 and cfg.beam_elevations[-1] == 15.0
    assert np.allclose(np.diff(cfg.beam_elevations), 2.0)
    dirs = cfg.ray_directions()
    assert dirs.shape == (16 * 1800, 3)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(azimuth_resolution=0.0), dict(beam_elevations=(1.0, 0.0)), dict(beam_elevations=()), dict(noise_sigma=-1.0)],
)
def test_lidar_config_validation(kwargs):
    with pytest.raises(ValueError):
        LidarConfig(**kwargs)


def test_flat_ground_only_downward_beams_return():
    cloud = raycast(Scene((FLAT,)), seed=1)
    # 7 beams point below the horizon (-15..-3 deg); -1 deg reaches z=0 beyond 100 m
    assert len(cloud) == 7 * 1800
    assert set(np.unique(cloud.beam).tolist()) == set(range(7))
    # range noise projects onto z by sin(elevation) <= sin(15 deg)
    assert np.abs(cloud.xyz[:, 2]).max() <= 3 * 0.01
    assert cloud.label.all()


def test_ground_hitting_beams_per_azimuth_at_30m():
    # ground 30 m around the sensor; count returning beams per azimuth column
    cloud = raycast(Scene((FLAT,)), LidarConfig(noise_sigma=0.0))
    per_column = np.bincount(cloud.azimuth_step, minlength=1800)
    assert per_column.min() >= 6 and per_column.max() <= 8


def test_noiseless_points_lie_on_surfaces():
    scene = canonical_scenes()["urban"]
    sim = raycast_scan(scene, LidarConfig(noise_sigma=0.0))
    ground = sim.cloud.xyz[sim.element == 0]
    np.testing.assert_allclose(ground[:, 2], 0.0, atol=1e-9)
    for k, element in enumerate(scene.elements):
        if isinstance(element, Wall):
            pts = sim.cloud.xyz[sim.element == k]
            p0 = np.asarray(element.start)
            seg = np.asarray(element.end) - p0
            normal = np.array([-seg[1], seg[0]]) / np.linalg.norm(seg)
            np.testing.assert_allclose((pts[:, :2] - p0) @ normal, 0.0, atol=1e-9)


def test_noise_stays_within_four_sigma_along_ray():
    scene = canonical_scenes()["two_slope_wall"]
    cfg = LidarConfig()
    clean = raycast_scan(scene, LidarConfig(noise_sigma=0.0))
    noisy = raycast_scan(scene, cfg, seed=5)
    # identical ray set, so points pair up by (beam, step)
    assert np.array_equal(clean.cloud.beam, noisy.cloud.beam)
    assert np.array_equal(clean.cloud.azimuth_step, noisy.cloud.azimuth_step)
    origin = cfg.origin
    r_clean = np.linalg.norm(clean.cloud.xyz - origin, axis=1)
    r_noisy = np.linalg.norm(noisy.cloud.xyz - origin, axis=1)
    # gaussian along the ray; 5 sigma is a safe bound for ~2e4 samples
    assert np.abs(r_noisy - r_clean).max() <= 5 * cfg.noise_sigma
    assert np.std(r_noisy - r_clean) == pytest.approx(cfg.noise_sigma, rel=0.05)
    # displacement is along the ray
    d_clean = (clean.cloud.xyz - origin) / r_clean[:, None]
    d_noisy = (noisy.cloud.xyz - origin) / r_noisy[:, None]
    np.testing.assert_allclose(d_clean, d_noisy, atol=1e-9)


def test_raycast_is_deterministic():
    scene = canonical_scenes()["crowded"]
    a, b = raycast(scene, seed=4), raycast(scene, seed=4)
    assert np.array_equal(a.xyz, b.xyz)
    assert not np.array_equal(a.xyz, raycast(scene, seed=5).xyz)


def test_labels_follow_hit_element():
    for name, scene in canonical_scenes().items():
        sim = raycast_scan(scene, seed=0)
        flags = np.array([e.is_ground for e in scene.elements])
        assert np.array_equal(sim.cloud.label.astype(bool), flags[sim.element]), name


def test_max_range_respected():
    far_wall = Wall((150.0, -50.0), (150.0, 50.0), (-10.0, 10.0))
    cloud = raycast(Scene((FLAT, far_wall)), LidarConfig(noise_sigma=0.0))
    assert np.linalg.norm(cloud.xyz - LidarConfig().origin, axis=1).max() <= 100.0


def test_canonical_scene_catalog():
    scenes = canonical_scenes()
    for name in ("flat", "two_slope_wall", "sloped_lane", "far_obstacle", "crowded", "low_fence", "tilted_ground"):
        assert name in scenes
    assert len(scenes["flat"].elements) == 1
    assert scenes["flat"].elements[0].kind == "ground_plane"


def test_two_slope_wall_layout():
    scene = canonical_scenes()["two_slope_wall"]
    grounds = [e for e in scene.elements if e.is_ground]
    walls = [e for e in scene.elements if isinstance(e, Wall)]
    assert len(grounds) == 2 and len(walls) == 1
    assert grounds[0].slope_deg != pytest.approx(grounds[1].slope_deg)


def test_far_obstacle_box_at_35m():
    sim = raycast_scan(canonical_scenes()["far_obstacle"])
    box = sim.cloud.xyz[sim.element == 2]
    assert len(box) > 0
    assert np.hypot(box[:, 0], box[:, 1]).min() == pytest.approx(35.0, abs=1.0)


def test_sloped_lane_grade_is_road_like():
    ramps = [e for e in canonical_scenes()["sloped_lane"].elements if e.kind == "ramp"]
    assert ramps and all(5.0 <= e.slope_deg <= 10.0 for e in ramps)


def test_crowded_hides_most_ground():
    sim = raycast_scan(canonical_scenes()["crowded"])
    assert sim.cloud.label.mean() < 0.5


def test_scene_validation():
    with pytest.raises(ValueError):
        Scene(())
    with pytest.raises(ValueError):
        Scene((Box((0, 0, 0), (1, 1, 1)),))
    steep = PlanePatch.from_gradient(0.0, (math.tan(math.radians(35.0)), 0.0), (-1, 1), (-1, 1))
    with pytest.raises(ValueError, match="slope"):
        Scene((steep,))
    Scene((PlanePatch.from_gradient(0.0, (math.tan(math.radians(35.0)), 0.0), (-1, 1), (-1, 1), is_ground=False), FLAT))


def test_box_yaw_rotates_footprint():
    box = Box((9.0, -1.0, 0.0), (11.0, 1.0, 2.0), yaw_deg=45.0)
    half_diag = math.sqrt(2.0)
    along_x = np.array([[1.0, 0.0, 0.0]])
    # footprint is the diamond |x - 10| + |y| <= sqrt(2)
    for y in (0.0, 0.95, 1.3):
        t = box.intersect(np.array([0.0, y, 1.0]), along_x)
        assert t[0] == pytest.approx(10.0 - (half_diag - y))
    assert np.isinf(box.intersect(np.array([0.0, 1.5, 1.0]), along_x)[0])


def test_parse_scene_file():
    text = """
[scene]
name = ramp_demo

[element.road]
kind = ground_plane
x_range = -50, 50
y_range = -50, 50

[element.ramp]
kind = ramp
x_range = 5, 30
y_range = 2, 10
gradient = 0.1, 0
anchor = 5, 0

[element.car]
kind = box
min = 10, -1, 0
max = 14.5, 0.8, 1.5

[element.fence]
kind = wall
start = -40, -8
end = 40, -8
z_range = 0, 0.6
"""
    scene = parse_scene(text)
    assert scene.name == "ramp_demo"
    assert [e.kind for e in scene.elements] == ["ground_plane", "ramp", "box", "wall"]
    assert [e.is_ground for e in scene.elements] == [True, True, False, False]
    assert scene.elements[1].height_at(15.0, 5.0) == pytest.approx(1.0)
    assert len(raycast(scene)) > 0


@pytest.mark.parametrize(
    "text, message",
    [
        ("[element.a]\nkind = cone\n", "unknown element kind"),
        ("[element.a]\nkind = ground_plane\nx_range = 0, 1\n", "missing key"),
    ],
)
def test_parse_scene_errors(text, message):
    with pytest.raises(ValueError, match=message):
        parse_scene(text)
