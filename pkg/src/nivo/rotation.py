"""Closed-form relative rotation from two or more tracked plane normals.

For a pair of planes with normals ``(n_ref, n_cur)`` related by
``n_ref = R @ n_cur`` there are three situations:

1. both normals unchanged: ``R`` is the identity;
2. one normal unchanged: it is the rotation axis and the angle follows from
   the other pair via the Rodrigues formula;
3. neither unchanged: the axis is orthogonal to both differences
   ``n_ref - n_cur`` and the angle follows as in case 2.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneratePairError, InconsistentPairError
from .geometry import axis_angle_matrix

CASE_IDENTITY = "identity"
CASE_ONE_FIXED = "one-fixed"
CASE_GENERAL = "general"
CASE_FALLBACK = "fallback"

_DEGENERATE = 1e-9


@dataclass(frozen=True)
class RotationParams:
    # 1 - 1e-12 is ~1.4e-6 rad; see notes on exact recovery in the README
    parallel_tol: float = 1.0 - 1e-12
    nonparallel_min_angle: float = np.deg2rad(10.0)
    max_residual: float = np.deg2rad(3.0)

    def __post_init__(self):
        if not 0 < self.parallel_tol < 1:
            raise ConfigError(f"rotation.parallel_tol must be in (0, 1), got {self.parallel_tol}")
        if not 0 <= self.nonparallel_min_angle < np.pi / 2:
            raise ConfigError("rotation.nonparallel_min_angle must be in [0, pi/2)")
        if not self.max_residual > 0:
            raise ConfigError(f"rotation.max_residual must be positive, got {self.max_residual}")


@dataclass(frozen=True, eq=False)
class RotationEstimate:
    rotation: np.ndarray
    residual: float  # radians
    case_tag: str
    pair_used: tuple | None
    fallback: bool = False

    @classmethod
    def fallback_signal(cls, residual=np.inf):
        return cls(np.eye(3), float(residual), CASE_FALLBACK, None, True)


def angle_about_axis(axis, n_ref, n_cur):
    """Signed angle rotating ``n_cur`` onto ``n_ref`` about unit ``axis``.

    Returns ``(angle, conditioning)`` where ``conditioning`` is
    ``|axis x n_cur|^2``, the squared radius of the cone ``n_cur`` sweeps.
    """
    a_dot = axis @ n_cur
    cross = np.cross(axis, n_cur)
    radius2 = cross @ cross
    cos_a = (n_ref @ n_cur - a_dot * a_dot) / (1.0 - a_dot * a_dot)
    sin_a = (n_ref @ cross) / radius2
    return float(np.arctan2(sin_a, cos_a)), float(radius2)


def _angle_between(a, b):
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b))


def classify_pair(n1r, n1c, n2r, n2c, params: RotationParams = RotationParams()) -> str:
    same1 = n1r @ n1c >= params.parallel_tol
    same2 = n2r @ n2c >= params.parallel_tol
    if same1 and same2:
        return CASE_IDENTITY
    if same1 or same2:
        return CASE_ONE_FIXED
    return CASE_GENERAL


def rotation_one_fixed(fixed_ref, nr, nc):
    """Rotation about the unchanged normal ``fixed_ref`` carrying ``nc`` onto ``nr``."""
    axis = fixed_ref / np.linalg.norm(fixed_ref)
    if np.linalg.norm(np.cross(axis, nc)) < _DEGENERATE:
        raise DegeneratePairError("moving normal is parallel to the fixed axis")
    angle, _ = angle_about_axis(axis, nr, nc)
    return axis_angle_matrix(axis, angle)


def rotation_general(n1r, n1c, n2r, n2c):
    """Axis orthogonal to both normal differences; angle from the better-conditioned pair."""
    d1, d2 = n1r - n1c, n2r - n2c
    axis = np.cross(d1, d2)
    norm = np.linalg.norm(axis)
    # relative test: the axis direction is well defined whenever d1 and d2 are not parallel
    if norm < _DEGENERATE * max(np.linalg.norm(d1) * np.linalg.norm(d2), _DEGENERATE):
        raise DegeneratePairError("normal differences are parallel; axis undefined")
    axis = axis / norm
    a1, c1 = angle_about_axis(axis, n1r, n1c)
    a2, c2 = angle_about_axis(axis, n2r, n2c)
    if max(c1, c2) < _DEGENERATE:
        raise DegeneratePairError("both normals lie on the rotation axis")
    # flipping the axis flips the angle's sign, so either sign gives the same matrix
    return axis_angle_matrix(axis, a1 if c1 >= c2 else a2)


def rotation_from_pair(n1r, n1c, n2r, n2c, params: RotationParams = RotationParams(),
                       return_case=False):
    """Rotation ``R`` with ``R @ n1c ~ n1r`` and ``R @ n2c ~ n2r``.

    Raises ``DegeneratePairError`` when the pair does not fix a rotation and
    ``InconsistentPairError`` when either pair misses by more than
    ``params.max_residual``.
    """
    n1r, n1c, n2r, n2c = (np.asarray(v, dtype=float) for v in (n1r, n1c, n2r, n2c))
    if _angle_between(n1r, n2r) < params.nonparallel_min_angle:
        raise DegeneratePairError("reference normals are nearly parallel")
    case = classify_pair(n1r, n1c, n2r, n2c, params)
    if case == CASE_IDENTITY:
        R = np.eye(3)
    elif case == CASE_ONE_FIXED:
        if n1r @ n1c >= params.parallel_tol:
            R = rotation_one_fixed(n1r, n2r, n2c)
        else:
            R = rotation_one_fixed(n2r, n1r, n1c)
    else:
        R = rotation_general(n1r, n1c, n2r, n2c)
    worst = max(_angle_between(R @ n1c, n1r), _angle_between(R @ n2c, n2r))
    if worst > params.max_residual:
        raise InconsistentPairError(
            f"rotation misses a pair by {np.rad2deg(worst):.3f} deg")
    return (R, case) if return_case else R


def mode_residual(R, modes) -> float:
    """Pixel-weighted mean angle between ``R @ normal_cur`` and ``normal_ref``."""
    cur = np.array([m.normal_cur for m in modes])
    ref = np.array([m.normal_ref for m in modes])
    w = np.array([m.pixel_count for m in modes], dtype=float)
    moved = cur @ R.T
    cross = np.linalg.norm(np.cross(moved, ref), axis=1)
    ang = np.arctan2(cross, np.einsum("ij,ij->i", moved, ref))
    return float(w @ ang / w.sum())


def estimate_rotation(modes, params: RotationParams = RotationParams()) -> RotationEstimate:
    """Best rotation over all admissible Mode pairs, scored on every Mode.

    Ties go to the larger combined pixel count, then to the lower pair
    index. Fewer than two admissible Modes, or no candidate within
    ``max_residual``, produce the fallback signal.
    """
    modes = list(modes)
    if len(modes) < 2:
        return RotationEstimate.fallback_signal()
    best = None
    for i, j in itertools.combinations(range(len(modes)), 2):
        a, b = modes[i], modes[j]
        try:
            R, case = rotation_from_pair(a.normal_ref, a.normal_cur, b.normal_ref, b.normal_cur,
                                         params, return_case=True)
        except (DegeneratePairError, InconsistentPairError):
            continue
        res = mode_residual(R, modes)
        key = (res, -(a.pixel_count + b.pixel_count), (i, j))
        if best is None or key < best[0]:
            best = (key, R, case)
    if best is None:
        return RotationEstimate.fallback_signal()
    (res, _, pair), R, case = best
    if res > params.max_residual:
        return RotationEstimate.fallback_signal(res)
    return RotationEstimate(R, res, case, pair)
