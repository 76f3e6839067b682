import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseground.scan import (
    CloudBounds,
    CloudFormatError,
    Point,
    PointCloud,
    crop_radius,
    grid_downsample,
    load_cloud,
    organize,
    write_cloud,
)


def cloud_of(rows):
    """Cloud from ``(x, y, z, beam, step)`` tuples."""
    rows = list(rows)
    if not rows:
        return PointCloud.empty()
    arr = np.array(rows, dtype=float)
    return PointCloud(arr[:, :3], arr[:, 3].astype(int), arr[:, 4].astype(int), np.arange(len(rows)))


# --------------------------------------------------------------------------
# load_cloud / write_cloud

def test_load_single_row(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("1.0,2.0,0.0,3,100\n")
    cloud = load_cloud(path)
    assert len(cloud) == 1
    assert cloud.point(0) == Point(1.0, 2.0, 0.0, 3, 100, 0)
    assert cloud.label is None


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert len(load_cloud(path)) == 0


def test_beam_out_of_range_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y,z,beam,azimuth_step\n0,0,0,0,0\n0,0,0,16,1\n")
    with pytest.raises(CloudFormatError, match="beam out of range") as info:
        load_cloud(path)
    assert info.value.line == 3


@pytest.mark.parametrize(
    "row, message",
    [
        ("1,2,nan,0,0", "non-finite"),
        ("1,2,inf,0,0", "non-finite"),
        ("1,2,3,0", "fields"),
        ("1,2,3,0,-1", "negative"),
        ("1,2,3,0,0,7", "label"),
        ("1,x,3,0,0", "could not convert"),
    ],
)
def test_malformed_rows(tmp_path, row, message):
    path = tmp_path / "bad.csv"
    path.write_text("0,0,0,0,0\n" + row + "\n")
    with pytest.raises(CloudFormatError, match=message) as info:
        load_cloud(path)
    assert info.value.line == 2


def test_header_and_crlf_accepted(tmp_path):
    path = tmp_path / "crlf.csv"
    path.write_bytes(b"x,y,z,beam,azimuth_step,label\r\n1,2,3,4,5,1\r\n6,7,8,9,10,0\r\n")
    cloud = load_cloud(path)
    assert cloud.xyz.tolist() == [[1, 2, 3], [6, 7, 8]]
    assert cloud.label.tolist() == [1, 0]
    assert cloud.point_id.tolist() == [0, 1]


def test_labels_dropped_when_partial(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("1,2,3,0,0,1\n1,2,3,0,1\n")
    assert load_cloud(path).label is None


def test_write_then_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    xyz = np.round(rng.uniform(-50, 50, (30, 3)), 6)
    cloud = PointCloud(xyz, rng.integers(0, 16, 30), rng.integers(0, 1800, 30), np.arange(30), rng.integers(0, 2, 30))
    path = tmp_path / "c.csv"
    write_cloud(path, cloud)
    back = load_cloud(path)
    np.testing.assert_allclose(back.xyz, cloud.xyz, atol=1e-9)
    assert back.beam.tolist() == cloud.beam.tolist()
    assert back.label.tolist() == cloud.label.tolist()


# --------------------------------------------------------------------------
# crop_radius

def test_crop_boundary_is_inclusive():
    cloud = cloud_of([(40.0, 0, 0, 0, 0), (41.0, 0, 0, 0, 1), (0, -40.0, 1, 0, 2)])
    kept = crop_radius(cloud, 40.0)
    assert kept.point_id.tolist() == [0, 2]


def test_crop_keeps_everything_inside():
    cloud = cloud_of([(1, 2, 3, 0, 0), (-3, 4, 0, 1, 1)])
    kept = crop_radius(cloud, 40.0)
    assert np.array_equal(kept.xyz, cloud.xyz)
    assert kept.point_id.tolist() == [0, 1]


def test_crop_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        crop_radius(cloud_of([(0, 0, 0, 0, 0)]), 0.0)


# --------------------------------------------------------------------------
# grid_downsample

def test_downsample_keeps_first_in_cell():
    cloud = cloud_of([(0.01, 0.01, 5.0, 0, 0), (0.05, 0.05, 7.0, 0, 1)])
    out = grid_downsample(cloud, 0.1)
    assert out.point_id.tolist() == [0]
    assert out.xyz[0, 2] == 5.0


def test_downsample_distinct_cells_all_kept():
    cloud = cloud_of([(i * 1.0, -i * 1.0, 0, 0, i) for i in range(10)])
    assert grid_downsample(cloud, 0.1).point_id.tolist() == list(range(10))


def test_downsample_negative_coordinates_use_floor():
    # -0.05 and 0.05 straddle zero and must land in different cells
    cloud = cloud_of([(-0.05, 0.0, 0, 0, 0), (0.05, 0.0, 0, 0, 1)])
    assert len(grid_downsample(cloud, 0.1)) == 2


def test_downsample_urban_density(sim):
    cloud = sim("urban").cloud
    assert 20000 <= len(cloud) <= 30000
    out = grid_downsample(crop_radius(cloud, 40.0), 0.1)
    assert 0.6 * 8000 <= len(out) <= 1.4 * 8000


xy_points = st.lists(
    st.tuples(st.floats(-20, 20, allow_nan=False), st.floats(-20, 20, allow_nan=False), st.floats(-3, 3)),
    min_size=0,
    max_size=80,
)


@settings(max_examples=60, deadline=None)
@given(xy_points, st.sampled_from([0.05, 0.1, 0.5, 2.0]))
def test_downsample_properties(points, cell):
    cloud = cloud_of([(x, y, z, 0, i) for i, (x, y, z) in enumerate(points)])
    once = grid_downsample(cloud, cell)
    # idempotent, order-preserving subset, one point per cell
    twice = grid_downsample(once, cell)
    assert twice.point_id.tolist() == once.point_id.tolist()
    assert once.point_id.tolist() == sorted(once.point_id.tolist())
    assert set(once.point_id.tolist()) <= set(range(len(points)))
    keys = [tuple(k) for k in np.floor(once.xyz[:, :2] / cell).astype(int).tolist()]
    assert len(keys) == len(set(keys))
    all_keys = {tuple(k) for k in np.floor(cloud.xyz[:, :2] / cell).astype(int).tolist()} if len(cloud) else set()
    assert set(keys) == all_keys


@settings(max_examples=40, deadline=None)
@given(xy_points, st.floats(1.0, 30.0))
def test_crop_then_downsample_is_a_subset(points, radius):
    cloud = cloud_of([(x, y, z, 0, i) for i, (x, y, z) in enumerate(points)])
    out = grid_downsample(crop_radius(cloud, radius), 0.1)
    for pid, xyz in zip(out.point_id, out.xyz):
        assert np.array_equal(cloud.xyz[pid], xyz)
        assert xyz[0] ** 2 + xyz[1] ** 2 <= radius ** 2


# --------------------------------------------------------------------------
# organize

def test_organize_three_distinct_cells():
    scan = organize(cloud_of([(1, 0, 0, 0, 0), (0, 1, 0, 1, 5), (2, 2, 0, 15, 1799)]))
    assert scan.filled() == 3
    assert scan.index[0, 0] == 0 and scan.index[1, 5] == 1 and scan.index[15, 1799] == 2
    assert scan.collisions == 0


def test_organize_empty():
    scan = organize(PointCloud.empty())
    assert scan.filled() == 0
    assert not scan.valid.any()


def test_organize_collision_keeps_nearer():
    scan = organize(cloud_of([(7.0, 0, 0, 2, 10), (5.0, 0, 0, 2, 10)]))
    assert scan.index[2, 10] == 1
    assert scan.collisions == 1


def test_organize_rejects_out_of_grid():
    with pytest.raises(ValueError):
        organize(cloud_of([(1, 0, 0, 16, 0)]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 9), st.floats(0.5, 50.0)), max_size=60))
def test_organize_is_lossless_up_to_collisions(entries):
    cloud = cloud_of([(r, 0.0, 0.0, b, c) for b, c, r in entries])
    scan = organize(cloud, rows=4, cols=10)
    assert scan.filled() + scan.collisions == len(entries)
    cells = scan.index[scan.valid]
    assert len(set(cells.tolist())) == len(cells)
    for b, c in {(b, c) for b, c, _ in entries}:
        held = scan.index[b, c]
        competitors = [i for i, (bb, cc, _) in enumerate(entries) if (bb, cc) == (b, c)]
        assert cloud.ranges[held] == min(cloud.ranges[i] for i in competitors)


def test_bounds_defaults():
    b = CloudBounds()
    assert (b.x_min, b.y_min, b.size) == (-40.0, -40.0, 80.0)
    with pytest.raises(ValueError):
        CloudBounds(half_extent=0.0)
