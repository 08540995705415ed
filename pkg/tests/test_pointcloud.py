import math

import numpy as np
import pytest

from radarpose.pointcloud import (
    FusedFrame,
    RadarPoint,
    RadarPose,
    align_streams,
    build_cloud,
    build_views,
    canonical_order,
    dbscan,
    denoise,
    fuse_records,
    normalize_snr,
    radar_to_world,
    transform_to_radar,
    transform_to_world,
    world_to_radar,
)
from radarpose.records import make_record


# ---------------------------------------------------------------------------
# brute-force DBSCAN reference: core graph components + border assignment
# ---------------------------------------------------------------------------

def reference_dbscan(pts, eps, min_pts):
    n = len(pts)
    neighbors = []
    for i in range(n):
        nb = []
        for j in range(n):
            d2 = sum((pts[i][k] - pts[j][k]) ** 2 for k in range(len(pts[i])))
            if d2 <= eps * eps:
                nb.append(j)
        neighbors.append(nb)
    core = [len(nb) >= min_pts for nb in neighbors]

    # connected components over core points (union-find)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        if not core[i]:
            continue
        for j in neighbors[i]:
            if core[j]:
                parent[find(i)] = find(j)

    # components labelled in ascending order of their smallest core index
    comp_label = {}
    labels = [-1] * n
    for i in range(n):
        if core[i]:
            root = find(i)
            if root not in comp_label:
                comp_label[root] = len(comp_label)
            labels[i] = comp_label[root]
    # border points take the earliest-created cluster among core neighbors
    for i in range(n):
        if core[i]:
            continue
        cand = [labels[j] for j in neighbors[i] if core[j]]
        if cand:
            labels[i] = min(cand)
    return np.array(labels)


def canonical_labels(labels):
    """Rename clusters by first appearance so labelings compare up to renaming."""
    mapping = {}
    out = []
    for lab in labels:
        if lab == -1:
            out.append(-1)
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return np.array(out)


def random_instance(rng, n_max=200):
    n_blobs = int(rng.integers(1, 4))
    centers = rng.uniform(-4.0, 4.0, size=(n_blobs, 3))
    # keep blob centers far apart so no point can border two clusters
    while len(centers) > 1 and np.min(
        [np.linalg.norm(a - b) for i, a in enumerate(centers) for b in centers[i + 1 :]]
    ) < 2.0:
        centers = rng.uniform(-4.0, 4.0, size=(n_blobs, 3))
    parts = [c + rng.normal(0, 0.08, size=(int(rng.integers(8, 40)), 3)) for c in centers]
    n_noise = int(rng.integers(0, 30))
    if n_noise:
        parts.append(rng.uniform(-5.0, 5.0, size=(n_noise, 3)))
    pts = np.vstack(parts)[:n_max]
    return pts


# ---------------------------------------------------------------------------
# rigid transform
# ---------------------------------------------------------------------------

def test_radar_to_world_identity_pose():
    pose = RadarPose(height_m=0.0, tilt_down_rad=0.0)
    p = RadarPoint(xyz=[0.3, 2.0, -0.1], velocity=0.5, snr=10.0)
    q = radar_to_world(p, pose)
    np.testing.assert_allclose(q.xyz, p.xyz, atol=1e-15)
    assert q.velocity == p.velocity and q.snr == p.snr


def test_radar_to_world_worked_example():
    # boresight point 2 m ahead of a radar mounted at 2 m, tilted 20 deg down
    pose = RadarPose(height_m=2.0, tilt_down_rad=math.radians(20.0))
    q = radar_to_world(RadarPoint(xyz=[0.0, 2.0, 0.0], velocity=0.0, snr=0.0), pose)
    # oracle: (0, 2 cos 20, 2 - 2 sin 20)
    np.testing.assert_allclose(q.xyz, [0.0, 2 * math.cos(math.radians(20)), 2 - 2 * math.sin(math.radians(20))], atol=1e-12)
    np.testing.assert_allclose(q.xyz, [0.0, 1.8794, 1.3160], atol=1e-4)


def test_transform_is_rigid_and_invertible():
    rng = np.random.default_rng(7)
    pose = RadarPose(height_m=1.7, tilt_down_rad=math.radians(12.0), lateral_offset_m=0.4)
    a = rng.uniform(-3, 3, size=(500, 3))
    b = rng.uniform(-3, 3, size=(500, 3))
    wa, wb = transform_to_world(a, pose), transform_to_world(b, pose)
    np.testing.assert_allclose(
        np.linalg.norm(wa - wb, axis=1), np.linalg.norm(a - b, axis=1), atol=1e-9
    )
    np.testing.assert_allclose(transform_to_radar(wa, pose), a, atol=1e-9)


def test_world_to_radar_roundtrip_single_point():
    pose = RadarPose(height_m=1.0, tilt_down_rad=math.radians(15.0))
    p = RadarPoint(xyz=[0.2, 2.5, 0.3], velocity=-0.4, snr=17.0)
    back = world_to_radar(radar_to_world(p, pose), pose)
    np.testing.assert_allclose(back.xyz, p.xyz, atol=1e-12)


def test_radar_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        RadarPoint(xyz=[np.nan, 0, 0], velocity=0.0, snr=0.0)


# ---------------------------------------------------------------------------
# stream alignment
# ---------------------------------------------------------------------------

def test_align_identical_timestamps():
    a = [0, 50, 100, 150]
    pairs = align_streams(a, list(a), window_ms=40)
    assert pairs == [(t, t) for t in a]


def test_align_offset_beyond_window_pairs_nothing():
    a = [0, 100, 200]
    b = [t + 100 for t in a[:2]]  # 100 > window/2 for every candidate except shared points
    pairs = align_streams(a, b, window_ms=100)
    # |dt| must be <= 50; (100,100) and (200,200) qualify at dt=0
    assert pairs == [(100, 100), (200, 200)]
    assert align_streams([0, 100], [250, 350], window_ms=100) == []


def test_align_greedy_nearest_example():
    pairs = align_streams([0, 100, 200], [10, 190], window_ms=50)
    assert pairs == [(0, 10), (200, 190)]


def test_align_each_frame_used_once():
    pairs = align_streams([0, 4], [2], window_ms=20)
    assert pairs == [(0, 2)]  # dt=2 beats dt=2? ties break toward earlier a


def test_align_rejects_unsorted():
    with pytest.raises(ValueError):
        align_streams([5, 1], [0], window_ms=10)


def test_align_on_records():
    recs_a = [{"t_ms": 0, "x": "a0"}, {"t_ms": 50, "x": "a1"}]
    recs_b = [{"t_ms": 2, "x": "b0"}, {"t_ms": 51, "x": "b1"}]
    pairs = align_streams(recs_a, recs_b, window_ms=20)
    assert [(p[0]["x"], p[1]["x"]) for p in pairs] == [("a0", "b0"), ("a1", "b1")]


# ---------------------------------------------------------------------------
# dbscan / denoise
# ---------------------------------------------------------------------------

def test_dbscan_empty():
    assert dbscan(np.zeros((0, 3)), eps=0.3, min_pts=4).size == 0


def test_dbscan_two_blobs_no_noise():
    rng = np.random.default_rng(3)
    blob1 = rng.normal(0, 0.05, size=(20, 3))
    blob2 = rng.normal(0, 0.05, size=(20, 3)) + [2.0, 0, 0]
    pts = np.vstack([blob1, blob2])
    labels = dbscan(pts, eps=0.3, min_pts=4)
    assert set(labels) == {0, 1}
    np.testing.assert_array_equal(labels, reference_dbscan(pts.tolist(), 0.3, 4))


def test_dbscan_isolated_point_is_noise():
    labels = dbscan(np.array([[0.0, 0.0, 0.0]]), eps=0.3, min_pts=2)
    assert labels.tolist() == [-1]


def test_dbscan_matches_bruteforce_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(25):
        pts = random_instance(rng)
        eps = float(rng.uniform(0.2, 0.4))
        min_pts = int(rng.integers(3, 7))
        got = dbscan(pts, eps, min_pts)
        want = reference_dbscan(pts.tolist(), eps, min_pts)
        np.testing.assert_array_equal(canonical_labels(got), canonical_labels(want))


def test_dbscan_permutation_invariant_up_to_renaming():
    rng = np.random.default_rng(13)
    pts = random_instance(rng)
    base = canonical_labels(dbscan(pts, 0.3, 5))
    for _ in range(5):
        perm = rng.permutation(len(pts))
        shuffled = dbscan(pts[perm], 0.3, 5)
        unshuffled = np.empty_like(shuffled)
        unshuffled[perm] = shuffled
        np.testing.assert_array_equal(canonical_labels(unshuffled), base)


def test_dbscan_validates_parameters():
    with pytest.raises(ValueError):
        dbscan(np.zeros((3, 3)), eps=0.0, min_pts=2)
    with pytest.raises(ValueError):
        dbscan(np.zeros((3, 3)), eps=0.3, min_pts=0)


def _points_from(arr):
    return [RadarPoint(xyz=row[:3], velocity=0.0, snr=5.0) for row in np.atleast_2d(arr)]


def test_denoise_keeps_dense_cluster():
    rng = np.random.default_rng(5)
    pts = _points_from(rng.normal(0, 0.05, size=(15, 3)))
    kept = denoise(pts, eps=0.3, min_pts=4)
    assert kept == pts


def test_denoise_removes_scattered_points():
    rng = np.random.default_rng(6)
    cluster = rng.normal(0, 0.05, size=(15, 3))
    far = np.array([[5, 5, 5], [-5, 4, 0], [6, -6, 1], [0, 9, 9], [-7, -7, -7]], dtype=float)
    pts = _points_from(np.vstack([cluster, far]))
    kept = denoise(pts, eps=0.3, min_pts=4)
    assert kept == pts[:15]
    assert denoise([], eps=0.3, min_pts=4) == []


# ---------------------------------------------------------------------------
# snr normalization
# ---------------------------------------------------------------------------

def _snr_record(snrs):
    points = [[0.0, 1.0, 0.0, 0.0, s] for s in snrs]
    return make_record(0, 0, 0, points, [[0.0, 0.0, 0.0]] * 32, "walk_toward", 0, "none")


def test_normalize_snr_affine_endpoints():
    recs, (lo, hi) = normalize_snr([_snr_record([10.0, 20.0, 30.0])])
    assert (lo, hi) == (10.0, 30.0)
    assert [p[4] for p in recs[0]["points"]] == [0.0, 0.5, 1.0]


def test_normalize_snr_degenerate_maps_to_half():
    recs, _ = normalize_snr([_snr_record([7.0, 7.0])])
    assert [p[4] for p in recs[0]["points"]] == [0.5, 0.5]


def test_normalize_snr_applies_stored_constants_unclamped():
    recs, _ = normalize_snr([_snr_record([40.0])], bounds=(10.0, 30.0))
    assert recs[0]["points"][0][4] == pytest.approx((40.0 - 10.0) / 20.0)
    assert recs[0]["points"][0][4] > 1.0


# ---------------------------------------------------------------------------
# view building
# ---------------------------------------------------------------------------

def test_build_views_empty_frame():
    vp = build_views([], n_max=8)
    assert vp.pad_count == 8
    assert not vp.view_xy.any() and not vp.view_yz.any()
    assert vp.view_xy.shape == (8, 4) and vp.view_yz.shape == (8, 4)


def test_build_views_truncates_to_nearest():
    pts = [RadarPoint(xyz=[0.0, float(r), 0.0], velocity=0.1, snr=0.5) for r in (6, 2, 4, 1, 5, 3)]
    vp = build_views(pts, n_max=4)
    assert vp.pad_count == 0
    np.testing.assert_allclose(vp.view_xy[:, 1], [1, 2, 3, 4])


def test_build_views_feature_layout():
    pts = [RadarPoint(xyz=[0.5, 2.0, 1.5], velocity=-0.3, snr=0.7)]
    vp = build_views(pts, n_max=2)
    np.testing.assert_allclose(vp.view_xy[0], [0.5, 2.0, -0.3, 0.7])
    np.testing.assert_allclose(vp.view_yz[0], [2.0, 1.5, -0.3, 0.7])
    assert vp.pad_count == 1


def test_build_views_exactly_permutation_invariant():
    rng = np.random.default_rng(9)
    pts = [
        RadarPoint(xyz=rng.uniform(-1, 3, 3), velocity=float(rng.normal()), snr=float(rng.uniform()))
        for _ in range(12)
    ]
    ref = build_views(pts, n_max=16)
    for _ in range(10):
        perm = rng.permutation(len(pts))
        vp = build_views([pts[i] for i in perm], n_max=16)
        assert np.array_equal(vp.view_xy, ref.view_xy)
        assert np.array_equal(vp.view_yz, ref.view_yz)


def test_build_cloud_matches_view_order():
    pts = [RadarPoint(xyz=[0.0, float(r), 0.2], velocity=0.0, snr=0.1) for r in (3, 1, 2)]
    cloud = build_cloud(pts, n_max=4)
    np.testing.assert_allclose(cloud[:3, 1], [1, 2, 3])
    assert not cloud[3].any()


def test_canonical_order_breaks_ties_on_all_features():
    arr = np.array(
        [
            [0.0, 2.0, 0.0, 0.5, 0.1],
            [0.0, 2.0, 0.0, -0.5, 0.1],
        ]
    )
    order = canonical_order(arr)
    assert order.tolist() == [1, 0]  # lower velocity first


# ---------------------------------------------------------------------------
# record-level fusion
# ---------------------------------------------------------------------------

def _blob_points(center, n, rng, v=0.0, snr=12.0):
    pts = rng.normal(0, 0.04, size=(n, 3)) + center
    return [[*p, v, snr] for p in pts]


def test_fuse_records_merges_and_timestamps():
    rng = np.random.default_rng(21)
    gt = [[0.0, 2.0, 1.0]] * 32
    rec_a = make_record(0, 100, 0, _blob_points([0, 2.2, 0], 10, rng), gt, "walk_toward", 0, "none")
    rec_b = make_record(0, 104, 1, _blob_points([0, 2.9, 0], 10, rng), gt, "walk_toward", 0, "none")
    fused = fuse_records([rec_a, rec_b], window_ms=50, eps=0.3, min_pts=4)
    assert len(fused) == 1
    assert fused[0]["t_ms"] == 102
    assert fused[0]["fused"] is True
    assert fused[0]["radar_id"] == -1
    assert len(fused[0]["points"]) == 20


def test_fuse_records_single_radar_mode():
    rng = np.random.default_rng(22)
    gt = [[0.0, 2.0, 1.0]] * 32
    rec_a = make_record(0, 100, 0, _blob_points([0, 2.2, 0], 10, rng), gt, "walk_toward", 0, "none")
    rec_b = make_record(0, 100, 1, _blob_points([0, 2.2, 0], 10, rng), gt, "walk_toward", 0, "none")
    fused = fuse_records([rec_a, rec_b], radar_ids=(0,), eps=0.3, min_pts=4)
    assert len(fused) == 1
    assert fused[0]["radar_id"] == 0
    assert len(fused[0]["points"]) == 10


def test_fuse_records_increases_vertical_extent():
    # dense boresight returns at several ranges: each radar's points live in
    # its own pitched plane, so the union spans more height than either alone
    rng = np.random.default_rng(23)
    gt = [[0.0, 2.0, 1.0]] * 32
    pts = []
    for r in (2.0, 2.1, 2.6, 2.7, 3.2, 3.3):
        pts.extend(_blob_points([0, r, 0], 5, rng))
    rec_a = make_record(0, 0, 0, pts, gt, "walk_toward", 0, "none")
    rec_b = make_record(0, 0, 1, pts, gt, "walk_toward", 0, "none")

    def z_extent(recs):
        zs = [p[2] for rec in recs for p in rec["points"]]
        return max(zs) - min(zs)

    both = z_extent(fuse_records([rec_a, rec_b], eps=0.3, min_pts=4))
    only_a = z_extent(fuse_records([rec_a, rec_b], radar_ids=(0,), eps=0.3, min_pts=4))
    only_b = z_extent(fuse_records([rec_a, rec_b], radar_ids=(1,), eps=0.3, min_pts=4))
    assert both >= only_a and both >= only_b
    assert both > min(only_a, only_b)
