import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import spearmanr

from nivo import kcc
from nivo.errors import ConfigError
from nivo.geometry import DepthImage, PointCloud, PoseSE3, backproject
from nivo.synthetic import TUM_INTRINSICS, render_view, room_corner_spec
from nivo.translation import (AxonometricFrame, ProjectionConfig, TranslationParams,
                              estimate_depth_shift, estimate_planar_shift, estimate_translation,
                              matched_pixels, project_axonometric, train_keyframe)

from oracles import project_loop

CFG = ProjectionConfig()


def cloud_of(points, valid=None):
    points = np.asarray(points, float)
    if valid is None:
        valid = np.ones(points.shape[:2], bool)
    return PointCloud(points, valid)


@pytest.fixture(scope="module")
def corner():
    """Exact cloud and intensity of the room-corner start frame."""
    spec = room_corner_spec(n_frames=1)
    depth, gray, _ = render_view(spec, spec.poses[0])
    return backproject(DepthImage.from_meters(depth), TUM_INTRINSICS), gray


def moved(cloud, delta):
    return PointCloud(cloud.points + np.asarray(delta, float), cloud.valid)


def jittered_grid(rng, n=80, r=0.01, jitter=0.3):
    """Points near cell centres so that whole-cell moves keep every binning decision."""
    ij = rng.integers(-100, 100, size=(n, n, 2))
    xy = (ij + rng.uniform(-jitter, jitter, size=(n, n, 2))) * r
    z = rng.uniform(1.0, 3.0, size=(n, n, 1))
    return np.concatenate([xy, z], axis=-1), rng.random((n, n))


def test_single_point_binning():
    f = project_axonometric(cloud_of([[[0.05, -0.03, 2.0]]]), np.array([[0.7]]))
    c = 128
    assert f.valid.sum() == 1
    assert f.valid[c - 3, c + 5] and f.depth[c - 3, c + 5] == 2.0 and f.color[c - 3, c + 5] == 0.7
    assert CFG.cell_of(0.05, -0.03) == (c + 5, c - 3)


def test_zbuffer_keeps_nearest():
    f = project_axonometric(cloud_of([[[0.0, 0.0, 2.0], [0.001, 0.0, 1.0]]]), np.array([[0.1, 0.9]]))
    assert f.valid.sum() == 1
    assert f.depth[128, 128] == 1.0 and f.color[128, 128] == 0.9


def test_zbuffer_tie_goes_to_first_pixel():
    f = project_axonometric(cloud_of([[[0.0, 0.0, 1.0], [0.001, 0.0, 1.0]]]), np.array([[0.1, 0.9]]))
    assert f.color[128, 128] == 0.1


def test_out_of_grid_is_empty():
    f = project_axonometric(cloud_of([[[5.0, 0.0, 1.0]]]), np.array([[0.5]]))
    assert f.empty
    model = kcc.train(np.zeros((256, 256)))
    assert estimate_planar_shift(f, f, model) is None
    assert not estimate_translation(f, f, model).ok


@given(seed=st.integers(0, 2**32 - 1), res=st.sampled_from([0.005, 0.01, 0.02]))
@settings(max_examples=20, deadline=None)
def test_projection_matches_loop_oracle(seed, res):
    rng = np.random.default_rng(seed)
    pts = np.concatenate([rng.uniform(-0.6, 0.6, (24, 30, 2)), rng.uniform(0.5, 3, (24, 30, 1))], -1)
    pts[..., 2] = np.round(pts[..., 2], 1)  # force depth ties
    valid = rng.random((24, 30)) > 0.2
    gray = rng.random((24, 30))
    cfg = ProjectionConfig(res, res, 64)
    f = project_axonometric(PointCloud(pts, valid), gray, cfg)
    color, depth, mask = project_loop(pts, valid, gray, res, 64)
    assert np.array_equal(f.valid, mask)
    assert np.array_equal(f.color, color) and np.array_equal(f.depth, depth)


def test_translated_cloud_shifts_projection():
    rng = np.random.default_rng(0)
    pts, gray = jittered_grid(rng)
    a = project_axonometric(cloud_of(pts), gray)
    b = project_axonometric(cloud_of(pts + [0.03, 0, 0]), gray)
    assert np.array_equal(b.valid[:, 3:], a.valid[:, :-3])
    assert np.array_equal(b.color[:, 3:], a.color[:, :-3])
    assert np.array_equal(b.depth[:, 3:], a.depth[:, :-3])


@given(seed=st.integers(0, 2**32 - 1), a=st.integers(-20, 20), b=st.integers(-20, 20),
       c=st.floats(-0.3, 0.3))
@settings(max_examples=20, deadline=None)
def test_pure_translation_exact(seed, a, b, c):
    rng = np.random.default_rng(seed)
    pts, gray = jittered_grid(rng, n=120, jitter=0.2)
    key = project_axonometric(cloud_of(pts), gray)
    cur = project_axonometric(cloud_of(pts + [a * 0.01, b * 0.01, c]), gray)
    est = estimate_translation(key, cur, train_keyframe(key))
    assert est.ok and est.cells == (b, a)
    assert est.displacement[0] == a * 0.01 and est.displacement[1] == b * 0.01
    assert abs(est.displacement[2] - c) < 1e-6
    assert np.array_equal(est.translation, -est.displacement)


def test_identity_shift_and_maximal_psr(corner):
    cloud, gray = corner
    key = project_axonometric(cloud, gray)
    model = train_keyframe(key)
    same = estimate_planar_shift(key, key, model)
    assert same.cells == (0, 0) and same.delta_x == 0 and same.delta_y == 0
    other = estimate_planar_shift(key, project_axonometric(moved(cloud, [0.02, 0.01, 0]), gray), model)
    assert same.psr > other.psr
    assert estimate_depth_shift(key, key, 0, 0) == 0.0


def test_corner_camera_moved_along_x():
    # the camera moves +4 cm along its own x axis, so the cloud moves -4 cm
    spec = room_corner_spec(n_frames=1)
    pose = spec.poses[0]
    frames = []
    for p in (pose, pose @ PoseSE3.from_rt(np.eye(3), [0.04, 0, 0])):
        depth, gray, _ = render_view(spec, p)
        frames.append(project_axonometric(backproject(DepthImage.from_meters(depth), TUM_INTRINSICS), gray))
    key, cur = frames
    est = estimate_translation(key, cur, train_keyframe(key))
    assert est.ok
    assert abs(est.translation[0] - 0.04) <= 0.01
    assert abs(est.translation[1]) <= 0.01 and abs(est.translation[2]) < 0.005


def test_depth_shift_five_centimetres(corner):
    cloud, gray = corner
    key = project_axonometric(cloud, gray)
    cur = project_axonometric(moved(cloud, [0, 0, 0.05]), gray)
    est = estimate_translation(key, cur, train_keyframe(key))
    assert est.cells == (0, 0)
    assert abs(est.displacement[2] - 0.05) < 0.005


def test_corrupted_depths_are_gated_out(corner):
    cloud, gray = corner
    key = project_axonometric(cloud, gray)
    cur = project_axonometric(moved(cloud, [0, 0, 0.05]), gray)
    rng = np.random.default_rng(1)
    bad = cur.valid & (rng.random(cur.valid.shape) < 0.3)
    depth = np.where(bad, cur.depth + rng.uniform(0.2, 1.0, bad.shape), cur.depth)
    color = np.where(bad, (cur.color + 0.5) % 1.0, cur.color)  # 0.5 away on the circle
    dirty = AxonometricFrame(color, depth, cur.valid)
    dz = estimate_depth_shift(key, dirty, 0, 0)
    assert abs(dz - 0.05) < 0.005
    # without the colour gate the corrupted cells drag the mean far off
    loose = TranslationParams(color_match_threshold=10.0)
    assert estimate_depth_shift(key, dirty, 0, 0, loose) > 0.1


@given(di=st.integers(-30, 30), dj=st.integers(-30, 30))
@settings(max_examples=20, deadline=None)
def test_every_matched_cell_passes_colour_gate(corner, di, dj):
    cloud, gray = corner
    key = project_axonometric(cloud, gray)
    cur = project_axonometric(moved(cloud, [0.013, -0.021, 0.02]), gray)
    p = TranslationParams()
    mask, _, cur_color = matched_pixels(key, cur, di, dj, p)
    assert np.all(np.abs(cur_color[mask] - key.color[mask]) < p.color_match_threshold)
    assert np.all(key.valid[mask])


def test_too_few_matches_is_no_estimate(corner):
    cloud, gray = corner
    key = project_axonometric(cloud, gray)
    strict = TranslationParams(min_matched_pixels=10**6)
    assert estimate_depth_shift(key, key, 0, 0, strict) is None
    est = estimate_translation(key, key, train_keyframe(key), params=strict)
    assert not est.ok and est.cells == (0, 0)


def test_psr_falls_as_overlap_shrinks(corner):
    cloud, gray = corner
    key = project_axonometric(cloud, gray)
    model = train_keyframe(key)
    shifts = np.arange(0, 1.21, 0.1)
    overlap, psr = [], []
    for s in shifts:
        cur = project_axonometric(moved(cloud, [s, 0, 0]), gray)
        mask, _, _ = matched_pixels(key, cur, 0, int(round(s / 0.01)))
        overlap.append(mask.sum())
        psr.append(estimate_planar_shift(key, cur, model).psr)
    rho = spearmanr(overlap, psr)[0]
    assert rho > 0.9  # i.e. PSR against shrinking overlap has rho < -0.9


def test_unrelated_frames_low_psr(corner):
    cloud, gray = corner
    key = project_axonometric(cloud, gray)
    other = room_corner_spec(n_frames=1)
    for k, p in enumerate(other.planes):
        p.texture.params["seed"] = 100 + k
    depth, gray2, _ = render_view(other, other.poses[0])
    cur = project_axonometric(backproject(DepthImage.from_meters(depth), TUM_INTRINSICS), gray2)
    res = estimate_planar_shift(key, cur, train_keyframe(key))
    assert res.psr < TranslationParams().psr_keyframe_threshold


def test_config_validation():
    with pytest.raises(ConfigError):
        ProjectionConfig(grid_size=100)
    with pytest.raises(ConfigError):
        ProjectionConfig(grid_size=16)
    with pytest.raises(ConfigError):
        ProjectionConfig(resolution_x=0)
    with pytest.raises(ConfigError):
        TranslationParams(color_match_threshold=0)
