"""Dense per-pixel surface normals from an organized point cloud."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import cv2
import numpy as np

from .errors import ConfigError
from .geometry import PointCloud

_MIN_CROSS_NORM = 1e-12
_MIN_MEAN_NORM = 1e-6


@dataclass(frozen=True, eq=False)
class NormalMap:
    """Unit normals ``(H, W, 3)`` facing the camera, with validity mask.

    ``points`` is the organized cloud the normals were computed from; it is
    kept so that orientation can be re-checked after smoothing.
    """

    normals: np.ndarray
    valid: np.ndarray
    points: np.ndarray | None = None

    @property
    def height(self):
        return self.valid.shape[0]

    @property
    def width(self):
        return self.valid.shape[1]


@dataclass(frozen=True)
class NormalMapParams:
    cell_size: int = 10

    def __post_init__(self):
        if int(self.cell_size) != self.cell_size or self.cell_size < 1:
            raise ConfigError(f"normals.cell_size must be an integer >= 1, got {self.cell_size}")


def compute_raw_normals(cloud: PointCloud) -> NormalMap:
    """Cross product of vertical and horizontal central differences.

    ``N(u,v) = (p(u,v+1) - p(u,v-1)) x (p(u-1,v) - p(u+1,v))`` with ``u`` the
    column and ``v`` the row, normalized and flipped to face the camera. The
    one-pixel image border is always invalid.
    """
    P = cloud.points
    valid = cloud.valid
    H, W = valid.shape
    normals = np.zeros((H, W, 3))
    out_valid = np.zeros((H, W), dtype=bool)
    if H < 3 or W < 3:
        return NormalMap(normals, out_valid, P)

    down, up = P[2:, 1:-1], P[:-2, 1:-1]
    left, right = P[1:-1, :-2], P[1:-1, 2:]
    ax, ay, az = (down[..., k] - up[..., k] for k in range(3))
    bx, by, bz = (left[..., k] - right[..., k] for k in range(3))
    n = normals[1:-1, 1:-1]
    n[..., 0] = ay * bz - az * by
    n[..., 1] = az * bx - ax * bz
    n[..., 2] = ax * by - ay * bx

    norm = np.sqrt(np.einsum("ijk,ijk->ij", n, n))
    ok = (valid[1:-1, 1:-1] & valid[2:, 1:-1] & valid[:-2, 1:-1]
          & valid[1:-1, :-2] & valid[1:-1, 2:] & (norm >= _MIN_CROSS_NORM))
    center = P[1:-1, 1:-1]
    facing = np.einsum("ijk,ijk->ij", n, center)
    scale = np.where(ok, np.where(facing > 0, -1.0, 1.0) / np.where(ok, norm, 1.0), 0.0)
    n *= scale[..., None]
    out_valid[1:-1, 1:-1] = ok
    return NormalMap(normals, out_valid, P)


@lru_cache(maxsize=8)
def _window_population(shape, cell):
    ones = np.ones(shape, dtype=np.float64)
    pop = cv2.boxFilter(ones, -1, (cell, cell), normalize=False, borderType=cv2.BORDER_CONSTANT)
    pop.setflags(write=False)
    return pop


def smooth_normals(raw: NormalMap, params: NormalMapParams = NormalMapParams()) -> NormalMap:
    """Box-filter the normal field and renormalize.

    A pixel stays valid only if it was valid, at least half of the in-image
    pixels of its window are valid, the mean has norm >= 1e-6 and the result
    still faces the camera.
    """
    cell = int(params.cell_size)
    if cell == 1:
        return raw
    valid_f = raw.valid.astype(np.float64)
    weighted = raw.normals * valid_f[..., None]
    sums = cv2.boxFilter(weighted, -1, (cell, cell), normalize=False,
                         borderType=cv2.BORDER_CONSTANT)
    count = cv2.boxFilter(valid_f, -1, (cell, cell), normalize=False,
                          borderType=cv2.BORDER_CONSTANT)
    population = _window_population(raw.valid.shape, cell)

    norm = np.sqrt(np.einsum("ijk,ijk->ij", sums, sums))
    # count * mean_norm == norm; compare in sum units to avoid a division
    ok = raw.valid & (2.0 * count >= population) & (norm >= _MIN_MEAN_NORM * np.maximum(count, 1.0))
    normals = sums / np.where(ok, norm, 1.0)[..., None]
    if raw.points is not None:
        ok &= np.einsum("ijk,ijk->ij", normals, raw.points) < 0
    normals[~ok] = 0.0
    return NormalMap(normals, ok, raw.points)


def compute_normal_map(cloud: PointCloud, params: NormalMapParams = NormalMapParams()) -> NormalMap:
    return smooth_normals(compute_raw_normals(cloud), params)


def angular_error(normal_map: NormalMap, truth) -> np.ndarray:
    """Per-pixel angle (radians) between valid normals and ``truth``.

    ``truth`` is a single 3-vector or an ``(H, W, 3)`` field.
    """
    truth = np.broadcast_to(np.asarray(truth, dtype=float), normal_map.normals.shape)
    n = normal_map.normals[normal_map.valid]
    t = truth[normal_map.valid]
    cos = np.clip(np.einsum("ij,ij->i", n, t), -1.0, 1.0)
    return np.arccos(cos)
