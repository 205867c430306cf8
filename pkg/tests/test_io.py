import shutil

import cv2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nivo.errors import LoadError
from nivo.geometry import CameraIntrinsics, PoseSE3
from nivo.io import (Trajectory, format_pose_line, load_sequence, read_manifest, read_trajectory,
                     write_manifest, write_trajectory)
from nivo.synthetic import SyntheticSceneSpec, corner_orbit_poses, render_raw, render_synthetic, room_corner_planes

from oracles import random_rotation

SMALL = CameraIntrinsics(52.5, 52.5, 31.95, 23.95, 64, 48, 5000.0)


def small_spec(n=3, noise=0.0):
    return SyntheticSceneSpec(room_corner_planes(), corner_orbit_poses(n), np.arange(n) / 30.0, SMALL,
                              depth_noise=noise, seed=4, min_visible_pixels=50)


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("seq")
    render_synthetic(small_spec(), root)
    return root


def copy_fixture(fixture_dir, tmp_path):
    dst = tmp_path / "seq"
    shutil.copytree(fixture_dir, dst)
    return dst


def test_three_frame_fixture(fixture_dir):
    seq = load_sequence(fixture_dir)
    frames = list(seq)
    assert len(frames) == 3
    stamps = [f.timestamp for f in frames]
    assert stamps == sorted(stamps) and len(set(stamps)) == 3
    assert frames[0].color.shape == (48, 64, 3) and frames[0].depth.data.shape == (48, 64)
    assert len(seq.read_groundtruth()) == 3
    # manifest file path works as well as the directory
    assert len(load_sequence(fixture_dir / "manifest.ini")) == 3


def test_loaded_back_bit_identical(fixture_dir):
    spec = small_spec()
    seq = load_sequence(fixture_dir)
    for i in range(3):
        color, raw = render_raw(spec, i)
        frame = seq.load_frame(i)
        assert np.array_equal(frame.color, color)
        assert np.array_equal(frame.depth.data, raw / 5000.0)
    gt = seq.read_groundtruth()
    for a, b in zip(gt.poses, spec.poses):
        assert np.array_equal(a.matrix, b.matrix)


def test_depth_scale(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    name = sorted((root / "depth").iterdir())[0]
    raw = np.zeros((48, 64), np.uint16)
    raw[5, 7] = 10000
    cv2.imwrite(str(name), raw)
    d = load_sequence(root).load_frame(0).depth
    assert d.data[5, 7] == 2.0 and d.valid[5, 7]
    assert not d.valid[0, 0] and d.data[0, 0] == 0


def test_missing_file_named(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    victim = sorted((root / "rgb").iterdir())[1]
    victim.unlink()
    with pytest.raises(LoadError, match=victim.name):
        load_sequence(root)


def test_malformed_associations(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    with open(root / "associations.txt", "a") as f:
        f.write("1.0 rgb/x.png 1.0\n")
    with pytest.raises(LoadError, match="associations.txt:4"):
        load_sequence(root)


def test_non_increasing_timestamps(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    lines = (root / "associations.txt").read_text().splitlines()
    (root / "associations.txt").write_text("\n".join([lines[1], lines[0], lines[2]]) + "\n")
    with pytest.raises(LoadError, match="not increasing"):
        load_sequence(root)


def test_wrong_bit_depth(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    name = sorted((root / "depth").iterdir())[0]
    cv2.imwrite(str(name), np.zeros((48, 64), np.uint8))
    with pytest.raises(LoadError, match="16-bit"):
        load_sequence(root).load_frame(0)


def test_size_mismatch(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    name = sorted((root / "depth").iterdir())[0]
    cv2.imwrite(str(name), np.zeros((10, 10), np.uint16))
    with pytest.raises(LoadError, match="does not match"):
        load_sequence(root).load_frame(0)


def test_undecodable_image(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    name = sorted((root / "rgb").iterdir())[0]
    name.write_bytes(b"not a png")
    with pytest.raises(LoadError, match=name.name):
        load_sequence(root).load_frame(0)


def test_tum_lists_and_depth_first(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    rows = [l.split() for l in (root / "associations.txt").read_text().splitlines()]
    (root / "associations.txt").unlink()
    (root / "rgb.txt").write_text("# color\n" + "".join(f"{r[0]} {r[1]}\n" for r in rows))
    (root / "depth.txt").write_text("".join(f"{float(r[2]) + 0.005:.6f} {r[3]}\n" for r in rows))
    seq = load_sequence(root)
    assert len(seq) == 3
    assert np.array_equal(seq.timestamps, [float(r[0]) for r in rows])

    (root / "rgb.txt").unlink()
    (root / "associations.txt").write_text("".join(f"{r[2]} {r[3]} {r[0]} {r[1]}\n" for r in rows))
    seq = load_sequence(root)
    assert str(seq.entries[0][1]).endswith(rows[0][1])


def test_manifest_errors(fixture_dir, tmp_path):
    root = copy_fixture(fixture_dir, tmp_path)
    (root / "manifest.ini").unlink()
    with pytest.raises(LoadError, match="manifest"):
        load_sequence(root)
    assert len(load_sequence(root, intrinsics=SMALL)) == 3
    (root / "manifest.ini").write_text("[camera]\nfx = abc\n")
    with pytest.raises(LoadError, match="camera"):
        load_sequence(root)
    (root / "manifest.ini").write_text("no sections here\n")
    with pytest.raises(LoadError):
        load_sequence(root)
    with pytest.raises(LoadError, match="not found"):
        load_sequence(tmp_path / "nowhere")


def test_manifest_round_trip(tmp_path):
    write_manifest(tmp_path / "m.ini", SMALL, "a.txt", "gt.txt")
    m = read_manifest(tmp_path / "m.ini")
    assert m["intrinsics"] == SMALL and m["associations"] == "a.txt" and m["groundtruth"] == "gt.txt"


def test_identity_line():
    assert format_pose_line(1.5, PoseSE3.identity()) == "1.5 0 0 0 0 0 0 1"


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_trajectory_round_trip(seed, tmp_path_factory):
    rng = np.random.default_rng(seed)
    poses = [PoseSE3.from_rt(random_rotation(rng, np.pi), rng.normal(size=3) * 10) for _ in range(5)]
    traj = Trajectory(np.sort(rng.uniform(0, 1e9, 5)), poses)
    path = tmp_path_factory.mktemp("traj") / "t.txt"
    write_trajectory(traj, path, header="line one\nline two")
    back = read_trajectory(path)
    assert np.array_equal(back.timestamps, traj.timestamps)
    for a, b in zip(back.poses, poses):
        assert np.array_equal(a.quat, b.quat) and np.array_equal(a.translation, b.translation)


def test_trajectory_parse_errors(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("# comment\n\n1 0 0 0 0 0 0 1\n2 0 0 0 0 0 1\n")
    with pytest.raises(LoadError, match=":4"):
        read_trajectory(p)
    p.write_text("1 0 0 0 0 0 0 1\n2 0 0 x 0 0 0 1\n")
    with pytest.raises(LoadError, match=":2"):
        read_trajectory(p)
    p.write_text("# only comments\n1 0 0 0 0 0 0 1\n")
    assert len(read_trajectory(p)) == 1
    with pytest.raises(LoadError):
        read_trajectory(tmp_path / "missing.txt")
