"""Ray-cast plane worlds with exact ground truth.

A scene is a set of infinite textured planes ``n . p + d = 0`` (world
frame) seen by a pinhole camera moving along a list of world<-camera poses.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import DEFAULT_MAX_RANGE, CameraIntrinsics, DepthImage, Frame, PoseSE3
from .io import Trajectory, frame_file_stem, load_sequence, write_frame_images, write_manifest, \
    write_trajectory

TUM_INTRINSICS = CameraIntrinsics(525.0, 525.0, 319.5, 239.5, 640, 480, 5000.0)
_VISIBILITY_STRIDE = 4


@dataclass(frozen=True)
class Texture:
    kind: str = "noise"  # "noise" | "checker" | "constant"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("noise", "checker", "constant"):
            raise ConfigError(f"unknown texture kind {self.kind!r}")

    def __hash__(self):
        return hash((self.kind, json.dumps(self.params, sort_keys=True)))

    def evaluate(self, a, b) -> np.ndarray:
        """Intensity in [0, 1] at plane-local coordinates ``(a, b)`` in meters."""
        p = self.params
        if self.kind == "constant":
            return np.full(np.shape(a), float(p.get("value", 0.5)))
        if self.kind == "checker":
            size = float(p.get("size", 0.1))
            parity = (np.floor(a / size) + np.floor(b / size)) % 2
            return np.where(parity == 0, float(p.get("low", 0.2)), float(p.get("high", 0.8)))
        k, phase = self._waves()
        # float32 phases: ~4x faster cos, and the result is stored as 8-bit anyway
        arg = (np.stack([np.ravel(a), np.ravel(b)], axis=1) @ k + phase).astype(np.float32)
        out = np.cos(arg).sum(axis=1, dtype=np.float64).reshape(np.shape(a))
        out *= float(p.get("contrast", 0.35)) / np.sqrt(k.shape[1] / 2.0)
        return np.clip(0.5 + out, 0.0, 1.0)

    def _waves(self):
        p = self.params
        rng = np.random.default_rng(int(p.get("seed", 0)))
        n = int(p.get("n_waves", 24))
        lo, hi = float(p.get("min_wavelength", 0.06)), float(p.get("max_wavelength", 0.6))
        wavelength = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
        theta = rng.uniform(0, 2 * np.pi, n)
        phase = rng.uniform(0, 2 * np.pi, n)
        k = 2 * np.pi / wavelength
        return np.stack([k * np.cos(theta), k * np.sin(theta)]), phase


@dataclass(frozen=True, eq=False)
class Plane:
    normal: np.ndarray
    offset: float
    texture: Texture = Texture()

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def basis(self):
        n = self.normal
        helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(n, helper)
        e1 /= np.linalg.norm(e1)
        return e1, np.cross(n, e1)


@dataclass(eq=False)
class SyntheticSceneSpec:
    planes: list
    poses: list  # world <- camera
    timestamps: np.ndarray
    intrinsics: CameraIntrinsics = TUM_INTRINSICS
    depth_noise: float = 0.0
    seed: int = 0
    max_range: float = DEFAULT_MAX_RANGE
    min_visible_pixels: int = 500
    min_plane_angle_deg: float = 10.0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if len(self.timestamps) != len(self.poses):
            raise ConfigError("scene needs one timestamp per pose")
        if self.depth_noise < 0:
            raise ConfigError(f"depth_noise must be >= 0, got {self.depth_noise}")

    def __len__(self):
        return len(self.poses)

    @property
    def groundtruth(self) -> Trajectory:
        return Trajectory(self.timestamps.copy(), list(self.poses))


class SceneValidationError(ConfigError):
    pass


def _camera_rays(intr: CameraIntrinsics, stride=1):
    u = np.arange(0, intr.width, stride, dtype=float)
    v = np.arange(0, intr.height, stride, dtype=float)
    uu, vv = np.meshgrid(u, v)
    return np.stack([(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy, np.ones_like(uu)], axis=-1)


def ray_cast(planes, pose: PoseSE3, rays, max_range=DEFAULT_MAX_RANGE):
    """Nearest plane hit along camera rays with unit z component.

    Returns ``(depth, plane_id)``; misses have depth 0 and id -1.
    """
    R, o = pose.rotation, pose.translation
    dirs = rays @ R.T
    depth = np.full(rays.shape[:-1], np.inf)
    plane_id = np.full(rays.shape[:-1], -1, dtype=np.int64)
    for k, plane in enumerate(planes):
        denom = dirs @ plane.normal
        num = -(plane.normal @ o + plane.offset)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = num / denom
        hit = np.isfinite(s) & (s > 1e-9) & (s < depth)
        depth[hit] = s[hit]
        plane_id[hit] = k
    miss = ~np.isfinite(depth) | (depth >= max_range)
    depth[miss] = 0.0
    plane_id[miss] = -1
    return depth, plane_id


def shade(planes, pose: PoseSE3, rays, depth, plane_id):
    """Texture intensity of each hit point."""
    world = (rays * depth[..., None]) @ pose.rotation.T + pose.translation
    out = np.zeros(depth.shape)
    for k, plane in enumerate(planes):
        m = plane_id == k
        if not np.any(m):
            continue
        e1, e2 = plane.basis()
        pts = world[m]
        out[m] = plane.texture.evaluate(pts @ e1, pts @ e2)
    return out


def render_view(spec: SyntheticSceneSpec, pose: PoseSE3):
    """Exact float depth (0 = no hit), intensity and plane id for one pose."""
    rays = _camera_rays(spec.intrinsics)
    depth, plane_id = ray_cast(spec.planes, pose, rays, spec.max_range)
    return depth, shade(spec.planes, pose, rays, depth, plane_id), plane_id


def visible_planes(spec: SyntheticSceneSpec, pose: PoseSE3, stride=_VISIBILITY_STRIDE):
    rays = _camera_rays(spec.intrinsics, stride)
    _, plane_id = ray_cast(spec.planes, pose, rays, spec.max_range)
    counts = np.bincount(plane_id[plane_id >= 0], minlength=len(spec.planes)) * stride * stride
    return [k for k, c in enumerate(counts) if c >= spec.min_visible_pixels]


def validate_scene(spec: SyntheticSceneSpec):
    """Check unit normals and that two non-parallel planes are seen from every pose."""
    if len(spec.planes) < 2:
        raise SceneValidationError("scene needs at least two planes")
    for k, plane in enumerate(spec.planes):
        if abs(np.linalg.norm(plane.normal) - 1.0) > 1e-6:
            raise SceneValidationError(f"plane {k} normal is not unit length")
    cos_max = np.cos(np.deg2rad(spec.min_plane_angle_deg))
    for i, pose in enumerate(spec.poses):
        vis = visible_planes(spec, pose)
        ok = any(abs(spec.planes[a].normal @ spec.planes[b].normal) < cos_max
                 for ia, a in enumerate(vis) for b in vis[ia + 1:])
        if not ok:
            raise SceneValidationError(
                f"pose {i} (t={spec.timestamps[i]:.6f}) sees fewer than two non-parallel planes "
                f"(visible: {vis})")


def render_raw(spec: SyntheticSceneSpec, index: int):
    """Stored-format images for frame ``index``: RGB uint8 and 16-bit depth."""
    depth, intensity, _ = render_view(spec, spec.poses[index])
    valid = depth > 0
    if spec.depth_noise > 0:
        rng = np.random.default_rng([spec.seed, index])
        depth = depth + rng.normal(0.0, spec.depth_noise, depth.shape)
        valid &= depth > 0
    raw = np.where(valid, np.round(depth * spec.intrinsics.depth_scale), 0)
    raw = np.clip(raw, 0, np.iinfo(np.uint16).max).astype(np.uint16)
    gray = np.round(intensity * 255.0).astype(np.uint8)
    return np.repeat(gray[..., None], 3, axis=2), raw


def render_frame(spec: SyntheticSceneSpec, index: int) -> Frame:
    color, raw = render_raw(spec, index)
    intr = spec.intrinsics
    depth = DepthImage.from_raw(raw, intr.depth_scale, spec.max_range)
    return Frame(index, float(spec.timestamps[index]), color, depth, intr)


class SyntheticSequence:
    """In-memory frame source with the same interface as ``io.Sequence``."""

    def __init__(self, spec: SyntheticSceneSpec, validate=True):
        if validate:
            validate_scene(spec)
        self.spec = spec
        self.intrinsics = spec.intrinsics

    def __len__(self):
        return len(self.spec)

    def __iter__(self):
        for i in range(len(self)):
            yield self.load_frame(i)

    def load_frame(self, index) -> Frame:
        return render_frame(self.spec, index)

    def read_groundtruth(self) -> Trajectory:
        return self.spec.groundtruth


def render_synthetic(spec: SyntheticSceneSpec, out_dir):
    """Validate, then write the sequence and ``groundtruth.txt`` to ``out_dir``."""
    validate_scene(spec)
    out = Path(out_dir)
    (out / "rgb").mkdir(parents=True, exist_ok=True)
    (out / "depth").mkdir(exist_ok=True)
    lines = []
    for i, t in enumerate(spec.timestamps):
        color, raw = render_raw(spec, i)
        color_rel, depth_rel = write_frame_images(out, t, color, raw)
        stem = frame_file_stem(t)
        lines.append(f"{stem} {color_rel} {stem} {depth_rel}")
    with open(out / "associations.txt", "w") as f:
        f.write("\n".join(lines) + "\n")
    write_trajectory(spec.groundtruth, out / "groundtruth.txt")
    write_manifest(out / "manifest.ini", spec.intrinsics, "associations.txt", "groundtruth.txt")
    return load_sequence(out)


# --- presets -----------------------------------------------------------------

def look_at(position, target, roll=0.0, up=(0.0, 0.0, 1.0)) -> PoseSE3:
    """World<-camera pose with optical axis toward ``target`` (x right, y down)."""
    position = np.asarray(position, dtype=float)
    f = np.asarray(target, dtype=float) - position
    f /= np.linalg.norm(f)
    right = np.cross(f, up)
    right /= np.linalg.norm(right)
    down = np.cross(f, right)
    c, s = np.cos(roll), np.sin(roll)
    right, down = c * right + s * down, -s * right + c * down
    return PoseSE3.from_rt(np.column_stack([right, down, f]), position)


def corner_orbit_poses(n_frames=200, center=(2.0, 2.0, 1.5), target=(0.3, 0.3, 0.3),
                       amplitude=(0.15, 0.10, 0.06), target_wobble=0.2, roll_deg=5.0):
    """Smooth closed loop in front of a room corner.

    With the defaults and 200 frames every step moves less than 1 cm and
    rotates less than 0.5 degrees.
    """
    center = np.asarray(center, dtype=float)
    target = np.asarray(target, dtype=float)
    ax, ay, az = amplitude
    poses = []
    for i in range(n_frames):
        th = 2 * np.pi * i / n_frames
        pos = center + np.array([ax * np.sin(th), ay * np.sin(2 * th), az * np.sin(th)])
        tgt = target + target_wobble * np.array([np.cos(th) - 1.0, np.sin(th), 0.0])
        poses.append(look_at(pos, tgt, np.deg2rad(roll_deg) * np.sin(2 * th)))
    return poses


def room_corner_planes(texture="noise", contrast=0.35):
    """Floor ``z=0`` and walls ``x=0``, ``y=0`` facing into the positive octant."""
    planes = []
    for k, n in enumerate(np.eye(3)):
        if texture == "constant":
            tex = Texture("constant", {"value": 0.3 + 0.2 * k})
        elif texture == "checker":
            tex = Texture("checker", {"size": 0.1 + 0.05 * k})
        else:
            tex = Texture("noise", {"seed": 11 + k, "contrast": contrast})
        planes.append(Plane(n, 0.0, tex))
    return planes


def room_corner_spec(n_frames=200, depth_noise=0.0, seed=0, intrinsics=TUM_INTRINSICS,
                     texture="noise", contrast=0.35, fps=30.0, **orbit) -> SyntheticSceneSpec:
    """Three orthogonal textured planes and a corner-facing orbit.

    ``texture="low"`` gives the weak-contrast preset standing in for
    low-texture indoor scenes.
    """
    if texture == "low":
        texture, contrast = "noise", 0.04
    planes = room_corner_planes(texture, contrast)
    poses = corner_orbit_poses(n_frames, **orbit)
    return SyntheticSceneSpec(planes, poses, np.arange(n_frames) / fps, intrinsics,
                              depth_noise=depth_noise, seed=seed)


def step_motion(poses):
    """Per-step translation (m) and rotation (rad) between consecutive poses."""
    trans, rot = [], []
    for a, b in zip(poses[:-1], poses[1:]):
        rel = a.inverse() @ b
        trans.append(np.linalg.norm(rel.translation))
        q = rel.quat
        rot.append(2 * np.arctan2(np.linalg.norm(q[:3]), abs(q[3])))
    return np.array(trans), np.array(rot)


# --- JSON scene files ------------------------------------------------------------

def _intrinsics_from(d):
    if d is None:
        return TUM_INTRINSICS
    return CameraIntrinsics(**d)


def spec_from_dict(d: dict) -> SyntheticSceneSpec:
    """Build a scene from a parsed JSON description.

    Either ``{"preset": "room_corner", ...keyword args}`` or an explicit
    ``planes`` list with ``poses`` rows ``[t, tx, ty, tz, qx, qy, qz, qw]``.
    """
    d = dict(d)
    intr = _intrinsics_from(d.pop("intrinsics", None))
    preset = d.pop("preset", None)
    if preset is not None:
        if preset != "room_corner":
            raise ConfigError(f"unknown scene preset {preset!r}")
        return room_corner_spec(intrinsics=intr, **d)
    try:
        planes = [Plane(p["normal"], p.get("offset", 0.0),
                        Texture(**p.get("texture", {"kind": "noise"}))) for p in d["planes"]]
        rows = np.asarray(d["poses"], dtype=float)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"scene description missing field: {e}") from None
    if rows.ndim != 2 or rows.shape[1] != 8:
        raise ConfigError("scene poses must be rows of [t, tx, ty, tz, qx, qy, qz, qw]")
    poses = [PoseSE3(r[4:8], r[1:4]) for r in rows]
    return SyntheticSceneSpec(
        planes, poses, rows[:, 0], intr,
        depth_noise=float(d.get("depth_noise", 0.0)), seed=int(d.get("seed", 0)),
        max_range=float(d.get("max_range", DEFAULT_MAX_RANGE)),
        min_visible_pixels=int(d.get("min_visible_pixels", 500)))


def load_scene_file(path) -> SyntheticSceneSpec:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return spec_from_dict(d)
