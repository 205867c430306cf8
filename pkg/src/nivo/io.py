"""TUM / ICL-NUIM style sequence loading and trajectory files.

Sequence layout::

    root/
      manifest.ini        # [camera] fx fy cx cy width height depth_scale
                          # [sequence] associations, groundtruth (optional)
      associations.txt    # "t_rgb rgb/<t>.png t_depth depth/<t>.png" per line
      rgb/*.png           # 8-bit color
      depth/*.png         # 16-bit depth, meters * depth_scale
      groundtruth.txt     # TUM trajectory, optional

Instead of ``associations.txt`` a sequence may ship the two TUM lists
``rgb.txt`` and ``depth.txt``; they are paired by nearest timestamp.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import ConfigError, LoadError
from .geometry import DEFAULT_MAX_RANGE, CameraIntrinsics, DepthImage, Frame, PoseSE3

MANIFEST_NAME = "manifest.ini"
MAX_ASSOCIATION_DT = 0.02


@dataclass
class Trajectory:
    timestamps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    poses: list = field(default_factory=list)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if len(self.timestamps) != len(self.poses):
            raise ConfigError("trajectory needs one timestamp per pose")

    def __len__(self):
        return len(self.poses)

    def __iter__(self):
        return iter(zip(self.timestamps, self.poses))

    @property
    def positions(self) -> np.ndarray:
        if not self.poses:
            return np.zeros((0, 3))
        return np.array([p.translation for p in self.poses])

    def append(self, timestamp, pose):
        self.timestamps = np.append(self.timestamps, float(timestamp))
        self.poses.append(pose)


def _fmt(x) -> str:
    # shortest repr that round-trips exactly; "+ 0.0" folds -0 into 0
    return np.format_float_positional(float(x) + 0.0, trim="-")


def format_pose_line(timestamp, pose: PoseSE3) -> str:
    values = [timestamp, *pose.translation, *pose.quat]
    return " ".join(_fmt(v) for v in values)


def write_trajectory(traj: Trajectory, path, header: str | None = None):
    """Write ``timestamp tx ty tz qx qy qz qw`` lines."""
    path = Path(path)
    with open(path, "w") as f:
        if header:
            for line in header.splitlines():
                f.write(f"# {line}\n")
        for t, pose in traj:
            f.write(format_pose_line(t, pose) + "\n")


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"{path}: trajectory file not found")
    stamps, poses = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 8:
                raise LoadError(f"{path}:{lineno}: expected 8 columns, got {len(parts)}")
            try:
                values = [float(v) for v in parts]
                pose = PoseSE3(values[4:8], values[1:4])
            except ValueError as e:
                raise LoadError(f"{path}:{lineno}: {e}") from None
            stamps.append(values[0])
            poses.append(pose)
    return Trajectory(np.array(stamps), poses)


def read_manifest(path) -> dict:
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with open(path) as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as e:
        raise LoadError(f"{path}: {e}") from None
    if "camera" not in parser:
        raise LoadError(f"{path}: missing [camera] section")
    cam = parser["camera"]
    try:
        intr = CameraIntrinsics(
            fx=cam.getfloat("fx"), fy=cam.getfloat("fy"),
            cx=cam.getfloat("cx"), cy=cam.getfloat("cy"),
            width=cam.getint("width"), height=cam.getint("height"),
            depth_scale=cam.getfloat("depth_scale", 5000.0))
    except (TypeError, ValueError) as e:
        raise LoadError(f"{path}: bad camera entry ({e})") from None
    seq = parser["sequence"] if "sequence" in parser else {}
    return {
        "intrinsics": intr,
        "associations": seq.get("associations", "associations.txt"),
        "groundtruth": seq.get("groundtruth") or None,
        "max_range": float(seq.get("max_range", DEFAULT_MAX_RANGE)),
    }


def write_manifest(path, intr: CameraIntrinsics, associations="associations.txt",
                   groundtruth=None):
    parser = configparser.ConfigParser()
    parser["camera"] = {
        "fx": repr(intr.fx), "fy": repr(intr.fy), "cx": repr(intr.cx), "cy": repr(intr.cy),
        "width": str(intr.width), "height": str(intr.height),
        "depth_scale": repr(intr.depth_scale),
    }
    parser["sequence"] = {"associations": associations}
    if groundtruth:
        parser["sequence"]["groundtruth"] = groundtruth
    with open(path, "w") as f:
        parser.write(f)


def _read_list(path):
    entries = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise LoadError(f"{path}:{lineno}: expected 'timestamp filename'")
            try:
                entries.append((float(parts[0]), parts[1]))
            except ValueError:
                raise LoadError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from None
    return entries


def _read_associations(path):
    entries = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 4:
                raise LoadError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            try:
                t1, t2 = float(parts[0]), float(parts[2])
            except ValueError:
                raise LoadError(f"{path}:{lineno}: bad timestamp") from None
            first, second = parts[1], parts[3]
            # ICL-NUIM ships depth-first associations, TUM tools write rgb-first
            if Path(first).parts[0].startswith("depth") and not Path(second).parts[0].startswith("depth"):
                entries.append((t2, second, t1, first))
            else:
                entries.append((t1, first, t2, second))
    return entries


def _pair_lists(rgb, depth, max_dt=MAX_ASSOCIATION_DT):
    if not depth:
        return []
    dt = np.array([t for t, _ in depth])
    out = []
    for t, name in rgb:
        j = int(np.argmin(np.abs(dt - t)))
        if abs(dt[j] - t) < max_dt:
            out.append((t, name, depth[j][0], depth[j][1]))
    return out


class Sequence:
    """Lazily decoded RGB-D sequence."""

    def __init__(self, root, entries, intrinsics: CameraIntrinsics, groundtruth=None,
                 max_range=DEFAULT_MAX_RANGE):
        self.root = Path(root)
        self.entries = entries  # (timestamp, color path, depth path)
        self.intrinsics = intrinsics
        self.groundtruth = groundtruth
        self.max_range = max_range

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        for i in range(len(self)):
            yield self.load_frame(i)

    @property
    def timestamps(self):
        return np.array([e[0] for e in self.entries])

    def load_frame(self, index) -> Frame:
        t, color_path, depth_path = self.entries[index]
        color = cv2.imread(str(color_path), cv2.IMREAD_UNCHANGED)
        if color is None:
            raise LoadError(f"{color_path}: cannot decode color image")
        if color.dtype != np.uint8:
            raise LoadError(f"{color_path}: expected 8-bit color, got {color.dtype}")
        if color.ndim == 3:
            color = cv2.cvtColor(color, cv2.COLOR_BGRA2RGB if color.shape[2] == 4 else cv2.COLOR_BGR2RGB)
        raw = cv2.imread(str(depth_path), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise LoadError(f"{depth_path}: cannot decode depth image")
        if raw.dtype != np.uint16 or raw.ndim != 2:
            raise LoadError(f"{depth_path}: expected single-channel 16-bit depth, got {raw.dtype} "
                            f"with shape {raw.shape}")
        intr = self.intrinsics
        if raw.shape != intr.shape or color.shape[:2] != intr.shape:
            raise LoadError(f"{depth_path}: image size {raw.shape[::-1]} does not match "
                            f"intrinsics {intr.width}x{intr.height}")
        depth = DepthImage.from_raw(raw, intr.depth_scale, self.max_range)
        return Frame(index, float(t), color, depth, intr)

    def read_groundtruth(self) -> Trajectory | None:
        return read_trajectory(self.groundtruth) if self.groundtruth else None


def load_sequence(path, intrinsics: CameraIntrinsics | None = None) -> Sequence:
    """Open a sequence directory (or its manifest file).

    Every referenced image must exist; decoding happens per frame.
    """
    path = Path(path)
    root = path.parent if path.is_file() else path
    manifest_path = path if path.is_file() else root / MANIFEST_NAME
    if not root.is_dir():
        raise LoadError(f"{root}: sequence directory not found")

    if manifest_path.is_file():
        manifest = read_manifest(manifest_path)
    elif intrinsics is not None:
        manifest = {"intrinsics": intrinsics, "associations": "associations.txt",
                    "groundtruth": None, "max_range": DEFAULT_MAX_RANGE}
    else:
        raise LoadError(f"{manifest_path}: manifest not found and no intrinsics given")
    if intrinsics is not None:
        manifest["intrinsics"] = intrinsics

    assoc = root / manifest["associations"]
    if assoc.is_file():
        rows = _read_associations(assoc)
    elif (root / "rgb.txt").is_file() and (root / "depth.txt").is_file():
        rows = _pair_lists(_read_list(root / "rgb.txt"), _read_list(root / "depth.txt"))
    else:
        raise LoadError(f"{assoc}: associations file not found")

    entries = []
    last = -np.inf
    for t, color_name, _, depth_name in rows:
        if t <= last:
            raise LoadError(f"{assoc}: timestamps not increasing at {t}")
        last = t
        color_path, depth_path = root / color_name, root / depth_name
        for p in (color_path, depth_path):
            if not p.is_file():
                raise LoadError(f"{p}: referenced file does not exist")
        entries.append((t, color_path, depth_path))

    gt = manifest["groundtruth"]
    if gt is None and (root / "groundtruth.txt").is_file():
        gt = "groundtruth.txt"
    gt_path = root / gt if gt else None
    return Sequence(root, entries, manifest["intrinsics"], gt_path, manifest["max_range"])


def frame_file_stem(timestamp) -> str:
    return f"{timestamp:.6f}"


def write_frame_images(root, timestamp, color_rgb, depth_raw):
    """Write one color/depth pair; returns the two relative paths."""
    root = Path(root)
    stem = frame_file_stem(timestamp)
    color_rel, depth_rel = f"rgb/{stem}.png", f"depth/{stem}.png"
    color = np.asarray(color_rgb)
    if color.ndim == 3:
        color = cv2.cvtColor(color, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(root / color_rel), color):
        raise LoadError(f"{root / color_rel}: write failed")
    if not cv2.imwrite(str(root / depth_rel), np.asarray(depth_raw, dtype=np.uint16)):
        raise LoadError(f"{root / depth_rel}: write failed")
    return color_rel, depth_rel
