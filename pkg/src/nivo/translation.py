"""Translation from axonometric projections of rotation-aligned clouds.

Once the current cloud is rotated into the keyframe orientation, the two
clouds differ by a pure translation. Dropping z and binning x, y at a fixed
metric resolution turns the in-plane part into an integer image shift that
the correlator finds; the remaining z offset is the mean depth difference
over pixels that match after undoing that shift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kcc
from .errors import ConfigError
from .geometry import PointCloud


@dataclass(frozen=True)
class ProjectionConfig:
    resolution_x: float = 0.01  # meters per cell
    resolution_y: float = 0.01
    grid_size: int = 256

    def __post_init__(self):
        if not (self.resolution_x > 0 and self.resolution_y > 0):
            raise ConfigError("projection resolutions must be positive")
        g = self.grid_size
        if g < 32 or g & (g - 1):
            raise ConfigError(f"projection.grid_size must be a power of two >= 32, got {g}")

    def cell_of(self, x, y):
        """``(column, row)`` of metric coordinates; the grid centre is the origin."""
        c = self.grid_size // 2 + 0.5
        col = np.floor(np.asarray(x, dtype=float) / self.resolution_x + c).astype(np.int64)
        row = np.floor(np.asarray(y, dtype=float) / self.resolution_y + c).astype(np.int64)
        return col, row


@dataclass(frozen=True)
class TranslationParams:
    color_match_threshold: float = 0.05
    psr_keyframe_threshold: float = 15.0
    min_matched_pixels: int = 100

    def __post_init__(self):
        if not self.color_match_threshold > 0:
            raise ConfigError("translation.color_match_threshold must be > 0")
        if self.min_matched_pixels < 1:
            raise ConfigError("translation.min_matched_pixels must be >= 1")


@dataclass(frozen=True, eq=False)
class AxonometricFrame:
    color: np.ndarray  # intensity in [0, 1], 0 where invalid
    depth: np.ndarray  # z of the retained point, 0 where invalid
    valid: np.ndarray

    @property
    def empty(self) -> bool:
        return not self.valid.any()

    @property
    def grid_size(self):
        return self.valid.shape[0]


@dataclass(frozen=True, eq=False)
class PlanarShift:
    delta_x: float
    delta_y: float
    psr: float
    cells: tuple  # (rows, cols): cur ~ key shifted by this many cells


def project_axonometric(cloud: PointCloud, intensity, cfg: ProjectionConfig = ProjectionConfig()
                        ) -> AxonometricFrame:
    """Bin points at ``(x / r_x, y / r_y)`` around the grid centre, nearest z per cell.

    Equal depths in one cell resolve to the lowest pixel index.
    """
    g = cfg.grid_size
    P = cloud.points.reshape(-1, 3)
    c = g // 2 + 0.5  # same arithmetic as ProjectionConfig.cell_of
    col = np.floor(P[:, 0] / cfg.resolution_x + c)
    row = np.floor(P[:, 1] / cfg.resolution_y + c)
    keep = cloud.valid.ravel() & (col >= 0) & (col < g) & (row >= 0) & (row < g)
    idx = np.flatnonzero(keep)
    cell = row[idx].astype(np.int64) * g + col[idx].astype(np.int64)
    z = P[idx, 2]
    vals = np.asarray(intensity, dtype=np.float64).ravel()[idx]

    zbuf = np.full(g * g, np.inf)
    np.minimum.at(zbuf, cell, z)
    win = np.flatnonzero(z == zbuf[cell])
    first = np.full(g * g, np.iinfo(np.int64).max)
    np.minimum.at(first, cell[win], win)

    valid = first != np.iinfo(np.int64).max
    color = np.zeros(g * g)
    depth = np.zeros(g * g)
    color[valid] = vals[first[valid]]
    depth[valid] = z[first[valid]]
    return AxonometricFrame(color.reshape(g, g), depth.reshape(g, g), valid.reshape(g, g))


def correlation_input(frame: AxonometricFrame) -> np.ndarray:
    return kcc.normalize_image(frame.color, frame.valid)


def train_keyframe(frame: AxonometricFrame, params: kcc.KccParams = kcc.KccParams()) -> kcc.KccModel:
    return kcc.train(correlation_input(frame), params)


def estimate_planar_shift(key: AxonometricFrame, cur: AxonometricFrame, model: kcc.KccModel,
                          cfg: ProjectionConfig = ProjectionConfig()) -> PlanarShift | None:
    """Metric in-plane displacement of ``cur`` relative to ``key``; ``None`` if either is empty."""
    if key.empty or cur.empty:
        return None
    if key.valid.shape != cur.valid.shape:
        raise ConfigError("axonometric frames must share the grid")
    res = kcc.detect(model, correlation_input(cur))
    di, dj = res.peak_shift
    return PlanarShift(dj * cfg.resolution_x, di * cfg.resolution_y, res.psr, (di, dj))


def _overlap(shape, di, dj):
    """Slices ``(key_sl, cur_sl)`` with ``cur[cur_sl]`` aligned to ``key[key_sl]``
    when ``cur`` is ``key`` moved by ``(di, dj)`` cells."""
    H, W = shape

    def axis(d, n):
        if d >= 0:
            return slice(0, n - d), slice(d, n)
        return slice(-d, n), slice(0, n + d)

    kr, cr = axis(di, H)
    kc, cc = axis(dj, W)
    return (kr, kc), (cr, cc)


def matched_pixels(key: AxonometricFrame, cur: AxonometricFrame, di, dj,
                   params: TranslationParams = TranslationParams()):
    """Key-grid mask of cells valid in both and within ``T_c`` in intensity, plus the
    aligned current depth and color."""
    key_sl, cur_sl = _overlap(key.valid.shape, di, dj)
    mask = np.zeros_like(key.valid)
    cur_depth = np.zeros_like(key.depth)
    cur_color = np.zeros_like(key.color)
    cur_depth[key_sl] = cur.depth[cur_sl]
    cur_color[key_sl] = cur.color[cur_sl]
    mask[key_sl] = cur.valid[cur_sl] & key.valid[key_sl]
    mask &= np.abs(cur_color - key.color) < params.color_match_threshold
    return mask, cur_depth, cur_color


def estimate_depth_shift(key: AxonometricFrame, cur: AxonometricFrame, di, dj,
                         params: TranslationParams = TranslationParams()) -> float | None:
    """Mean ``z_cur - z_key`` over matched cells after undoing the planar shift.

    ``None`` when fewer than ``min_matched_pixels`` cells match.
    """
    mask, cur_depth, _ = matched_pixels(key, cur, di, dj, params)
    n = int(np.count_nonzero(mask))
    if n < params.min_matched_pixels:
        return None
    return float(np.mean(cur_depth[mask] - key.depth[mask]))


@dataclass(frozen=True, eq=False)
class TranslationEstimate:
    displacement: np.ndarray | None  # cloud motion key -> cur, meters; None = no estimate
    psr: float
    cells: tuple | None

    @property
    def ok(self):
        return self.displacement is not None

    @property
    def translation(self) -> np.ndarray:
        """``t`` of the keyframe-from-current pose: the clouds satisfy ``p_key = R p_cur + t``."""
        return -self.displacement


def estimate_translation(key: AxonometricFrame, cur: AxonometricFrame, model: kcc.KccModel,
                         cfg: ProjectionConfig = ProjectionConfig(),
                         params: TranslationParams = TranslationParams()) -> TranslationEstimate:
    planar = estimate_planar_shift(key, cur, model, cfg)
    if planar is None:
        return TranslationEstimate(None, 0.0, None)
    dz = estimate_depth_shift(key, cur, *planar.cells, params)
    if dz is None:
        return TranslationEstimate(None, planar.psr, planar.cells)
    return TranslationEstimate(np.array([planar.delta_x, planar.delta_y, dz]), planar.psr,
                               planar.cells)
