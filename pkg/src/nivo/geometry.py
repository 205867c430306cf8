"""Pinhole camera model, rigid-body poses and organized point clouds."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigError, DataError

DEFAULT_MAX_RANGE = 10.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    depth_scale: float = 5000.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ConfigError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}")
        if not self.depth_scale > 0:
            raise ConfigError(f"depth_scale must be positive, got {self.depth_scale}")

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def K(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for an image resized by ``factor`` (pixel-center convention)."""
        return CameraIntrinsics(
            self.fx * factor, self.fy * factor,
            (self.cx + 0.5) * factor - 0.5, (self.cy + 0.5) * factor - 0.5,
            int(round(self.width * factor)), int(round(self.height * factor)),
            self.depth_scale)


def _canonical_quat(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    # leave already-unit input alone so that write/read round trips are bit-exact
    if abs(n - 1.0) > 4 * np.finfo(float).eps:
        q = q / n
    # q and -q are the same rotation; keep w >= 0 so serialization is stable
    if q[3] < 0 or (q[3] == 0 and q[np.flatnonzero(q)[0]] < 0):
        q = -q
    return q


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform ``p_out = R @ p_in + t``.

    The rotation is stored as a unit quaternion ``(qx, qy, qz, qw)`` and the
    matrix is materialized on demand.
    """

    quat: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.quat, dtype=float).reshape(4)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise DataError("pose contains non-finite values")
        n = np.linalg.norm(q)
        if n < 1e-12:
            raise DataError("pose quaternion has zero norm")
        q = _canonical_quat(q)
        q.setflags(write=False)
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "quat", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls()

    @classmethod
    def from_rt(cls, R, t=(0.0, 0.0, 0.0)) -> "PoseSE3":
        R = np.asarray(R, dtype=float)
        if R.shape != (3, 3):
            raise ConfigError(f"rotation must be 3x3, got {R.shape}")
        return cls(Rotation.from_matrix(R).as_quat(), t)

    @classmethod
    def from_matrix(cls, T) -> "PoseSE3":
        T = np.asarray(T, dtype=float)
        return cls.from_rt(T[:3, :3], T[:3, 3])

    @property
    def rotation(self) -> np.ndarray:
        return Rotation.from_quat(self.quat).as_matrix()

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "PoseSE3":
        q_inv = self.quat * np.array([-1.0, -1.0, -1.0, 1.0])
        R_inv = Rotation.from_quat(q_inv).as_matrix()
        return PoseSE3(q_inv, -R_inv @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform an ``(..., 3)`` array of points."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def __matmul__(self, other: "PoseSE3") -> "PoseSE3":
        return compose(self, other)

    def __repr__(self):
        q = np.array2string(self.quat, precision=6)
        t = np.array2string(self.translation, precision=6)
        return f"PoseSE3(quat={q}, translation={t})"


def _quat_mul(a, b):
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """``a ∘ b``: apply ``b`` first, then ``a``."""
    q = _quat_mul(a.quat, b.quat)
    t = a.rotation @ b.translation + a.translation
    return PoseSE3(q / np.linalg.norm(q), t)


def rotation_angle(R) -> float:
    """Angle in radians of a rotation matrix."""
    c = (np.trace(R) - 1.0) / 2.0
    s = np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    return float(np.arctan2(s, c))


def geodesic_distance(R1, R2) -> float:
    """Angle of ``R1 @ R2.T``."""
    return rotation_angle(np.asarray(R1) @ np.asarray(R2).T)


def axis_angle_matrix(axis, angle) -> np.ndarray:
    """Rodrigues matrix for a rotation by ``angle`` about unit ``axis``."""
    k = np.asarray(axis, dtype=float)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Metric depth with an explicit validity mask; invalid pixels hold 0."""

    data: np.ndarray
    valid: np.ndarray

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @classmethod
    def from_meters(cls, depth, max_range=DEFAULT_MAX_RANGE) -> "DepthImage":
        depth = np.asarray(depth, dtype=np.float64)
        if depth.ndim != 2:
            raise ConfigError(f"depth must be 2-D, got shape {depth.shape}")
        with np.errstate(invalid="ignore"):
            valid = np.isfinite(depth) & (depth > 0) & (depth < max_range)
        data = np.where(valid, depth, 0.0)
        data.setflags(write=False)
        valid.setflags(write=False)
        return cls(data, valid)

    @classmethod
    def from_raw(cls, raw, depth_scale, max_range=DEFAULT_MAX_RANGE) -> "DepthImage":
        """Convert stored integer depth units (e.g. TUM 16-bit) to meters."""
        return cls.from_meters(np.asarray(raw, dtype=np.float64) / depth_scale, max_range)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Organized ``(H, W, 3)`` cloud; invalid points are zero."""

    points: np.ndarray
    valid: np.ndarray

    @property
    def shape(self):
        return self.valid.shape


@dataclass(frozen=True, eq=False)
class Frame:
    frame_id: int
    timestamp: float
    color: np.ndarray  # (H, W, 3) uint8 RGB or (H, W) grayscale
    depth: DepthImage
    intrinsics: CameraIntrinsics

    @property
    def intensity(self) -> np.ndarray:
        """Luma in [0, 1]."""
        return to_intensity(self.color)


def to_intensity(color) -> np.ndarray:
    color = np.asarray(color)
    scale = 255.0 if color.dtype == np.uint8 else (65535.0 if color.dtype == np.uint16 else 1.0)
    c = color.astype(np.float64) / scale
    if c.ndim == 3:
        # ITU-R BT.601 luma, RGB channel order
        c = c[..., 0] * 0.299 + c[..., 1] * 0.587 + c[..., 2] * 0.114
    return c


@lru_cache(maxsize=8)
def _ray_grid(intr: CameraIntrinsics):
    u = (np.arange(intr.width) - intr.cx) / intr.fx
    v = (np.arange(intr.height) - intr.cy) / intr.fy
    xr, yr = np.meshgrid(u, v)
    xr.setflags(write=False)
    yr.setflags(write=False)
    return xr, yr


def backproject(depth: DepthImage, intr: CameraIntrinsics) -> PointCloud:
    """Lift every valid pixel to ``depth * [(u-cx)/fx, (v-cy)/fy, 1]``."""
    if (depth.height, depth.width) != intr.shape:
        raise ConfigError(
            f"depth is {depth.width}x{depth.height} but intrinsics expect {intr.width}x{intr.height}")
    xr, yr = _ray_grid(intr)
    z = depth.data
    points = np.empty(z.shape + (3,))
    np.multiply(xr, z, out=points[..., 0])
    np.multiply(yr, z, out=points[..., 1])
    points[..., 2] = z
    return PointCloud(points, depth.valid)


def project(points, intr: CameraIntrinsics):
    """Pinhole projection of ``(..., 3)`` points to pixel coordinates ``(u, v)``."""
    points = np.asarray(points, dtype=float)
    z = points[..., 2]
    return intr.fx * points[..., 0] / z + intr.cx, intr.fy * points[..., 1] / z + intr.cy


def align_cloud(cloud: PointCloud, R) -> PointCloud:
    """Rotate every point by ``R``; the validity mask is unchanged."""
    R = np.asarray(R, dtype=float)
    flat = cloud.points.reshape(-1, 3) @ R.T
    return PointCloud(flat.reshape(cloud.points.shape), cloud.valid)
