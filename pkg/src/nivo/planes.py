"""Association of overlapping planes between two normal maps.

Pixels whose reference and current normals agree are grouped greedily into
Modes, one per tracked plane, without clustering the full cloud.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .normals import NormalMap


@dataclass(frozen=True)
class PlaneTrackerParams:
    threshold_overlap: float = 0.95
    threshold_mode: float = 0.98
    min_mode_pixels: int = 500
    max_modes: int = 8
    # seeds allowed during the scan; small seeds are dropped before max_modes applies
    max_seeds: int = 32
    refine: bool = True

    def __post_init__(self):
        if not 0 < self.threshold_overlap <= 1:
            raise ConfigError(f"planes.threshold_overlap must be in (0, 1], got {self.threshold_overlap}")
        if not 0 < self.threshold_mode <= 1:
            raise ConfigError(f"planes.threshold_mode must be in (0, 1], got {self.threshold_mode}")
        if self.min_mode_pixels < 3:
            raise ConfigError(f"planes.min_mode_pixels must be >= 3, got {self.min_mode_pixels}")
        if self.max_modes < 1 or self.max_seeds < self.max_modes:
            raise ConfigError("planes.max_modes must be >= 1 and <= planes.max_seeds")


@dataclass(frozen=True, eq=False)
class PlaneMode:
    normal_ref: np.ndarray
    normal_cur: np.ndarray
    pixel_count: int
    member_pixels: np.ndarray | None = None  # flat row-major pixel indices

    def __repr__(self):
        r = np.array2string(self.normal_ref, precision=4)
        c = np.array2string(self.normal_cur, precision=4)
        return f"PlaneMode(ref={r}, cur={c}, pixels={self.pixel_count})"


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


# interim representatives only need to be close; final medians use every member
_INTERIM_SAMPLES = 4096


def _median_normal(cols, members, limit=None):
    """Component-wise median of ``cols[:, members]`` (``cols`` is ``(3, N)``), renormalized."""
    if limit is not None and len(members) > limit:
        members = members[::-(-len(members) // limit)]
    sub = cols[:, members]
    return _unit(np.array([np.median(sub[k]) for k in range(3)]))


def overlap_pool(ref: NormalMap, cur: NormalMap, threshold_overlap: float) -> np.ndarray:
    """Row-major indices of pixels whose two normals agree."""
    if ref.valid.shape != cur.valid.shape:
        raise ConfigError(f"normal maps differ in size: {ref.valid.shape} vs {cur.valid.shape}")
    both = ref.valid & cur.valid
    dots = np.einsum("ijk,ijk->ij", ref.normals, cur.normals)
    return np.flatnonzero(both & (dots >= threshold_overlap))


def _greedy_seeds(nr, thr, max_seeds):
    """Labels from a first-fit scan with each Mode represented by its seed normal.

    Processing one Mode at a time gives the same labels as the per-pixel scan:
    the next seed is always the earliest pixel no existing Mode accepted.
    ``nr`` is ``(3, N)``.
    """
    labels = np.full(nr.shape[1], -1, dtype=np.int64)
    remaining = np.arange(nr.shape[1])
    rem = nr
    k = 0
    while len(remaining) and k < max_seeds:
        seed = rem[:, 0]
        join = seed[0] * rem[0] + seed[1] * rem[1] + seed[2] * rem[2] >= thr
        labels[remaining[join]] = k
        keep = ~join
        remaining = remaining[keep]
        rem = rem[:, keep]
        k += 1
    return labels, k


def track_planes(ref: NormalMap, cur: NormalMap,
                 params: PlaneTrackerParams = PlaneTrackerParams(),
                 keep_members=False) -> list[PlaneMode]:
    """Modes of co-planar overlapping pixels, largest first.

    An empty list means no pixel passed the overlap test.
    """
    pool = overlap_pool(ref, cur, params.threshold_overlap)
    if len(pool) == 0:
        return []
    nr = np.ascontiguousarray(ref.normals.reshape(-1, 3)[pool].T)
    nc = np.ascontiguousarray(cur.normals.reshape(-1, 3)[pool].T)
    labels, n_seeds = _greedy_seeds(nr, params.threshold_mode, params.max_seeds)

    groups = _collect(labels, n_seeds, params.min_mode_pixels)
    reps = [_median_normal(nr, g, _INTERIM_SAMPLES) for g in groups]
    groups, reps = _merge_close(groups, reps, nr, params.threshold_mode)
    if params.refine and reps:
        # one reassignment against the medians; no iteration
        dots = np.array(reps) @ nr
        best = np.argmax(dots, axis=0)
        ok = np.take_along_axis(dots, best[None], axis=0)[0] >= params.threshold_mode
        labels = np.where(ok, best, -1)
        groups = _collect(labels, len(reps), params.min_mode_pixels)

    modes = [PlaneMode(_median_normal(nr, g), _median_normal(nc, g), len(g),
                       pool[g] if keep_members else None)
             for g in groups]
    # stable sort keeps scan order among equal counts
    modes.sort(key=lambda m: -m.pixel_count)
    return modes[:params.max_modes]


def _collect(labels, n_labels, min_pixels):
    counts = np.bincount(labels[labels >= 0], minlength=n_labels)
    return [np.flatnonzero(labels == k) for k in range(n_labels) if counts[k] >= min_pixels]


def _merge_close(groups, reps, nr, thr):
    """Fold a Mode into an earlier one when their median normals agree."""
    merged = True
    while merged and len(groups) > 1:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if reps[i] @ reps[j] >= thr:
                    groups[i] = np.sort(np.concatenate([groups[i], groups[j]]))
                    reps[i] = _median_normal(nr, groups[i], _INTERIM_SAMPLES)
                    del groups[j], reps[j]
                    merged = True
                    break
            if merged:
                break
    return groups, reps


def coverage(modes) -> int:
    return int(sum(m.pixel_count for m in modes))


def mode_id_image(ref: NormalMap, cur: NormalMap, params: PlaneTrackerParams = PlaneTrackerParams()):
    """Per-pixel Mode index (0 = untracked, k+1 = Mode k) for visual checks."""
    modes = track_planes(ref, cur, params, keep_members=True)
    img = np.zeros(ref.valid.size, dtype=np.uint8)
    for k, m in enumerate(modes):
        img[m.member_pixels] = k + 1
    return img.reshape(ref.valid.shape)


def write_mode_pgm(path, mode_ids: np.ndarray):
    """Binary PGM with Mode ids spread over the gray range."""
    img = np.asarray(mode_ids, dtype=np.uint16)
    top = max(int(img.max()), 1)
    gray = (img * (255 // top)).astype(np.uint8)
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(gray.tobytes())
