"""Trajectory metrics: rigid alignment, ATE statistics and anchored drift."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .geometry import PoseSE3, compose, rotation_angle
from .io import Trajectory

MAX_DT = 0.02
REPORT_COLUMNS = ("rmse", "mean", "median", "std", "sse")


def associate(est: Trajectory, gt: Trajectory, max_dt=MAX_DT):
    """One-to-one ``(i_est, i_gt)`` pairs, closest timestamps first, ``|dt| <= max_dt``."""
    if len(est) == 0 or len(gt) == 0:
        return []
    te, tg = est.timestamps, gt.timestamps
    order = np.argsort(tg, kind="stable")
    tg_sorted = tg[order]
    cand = []
    for i, t in enumerate(te):
        k = np.searchsorted(tg_sorted, t)
        for j in (k - 1, k):
            if 0 <= j < len(tg_sorted):
                dt = abs(tg_sorted[j] - t)
                if dt <= max_dt:
                    cand.append((dt, i, int(order[j])))
    cand.sort()
    used_e, used_g, pairs = set(), set(), []
    for _, i, j in cand:
        if i not in used_e and j not in used_g:
            used_e.add(i)
            used_g.add(j)
            pairs.append((i, j))
    pairs.sort()
    return pairs


def rigid_transform(src, dst) -> PoseSE3:
    """Least-squares ``T`` with ``T(src) ~ dst`` (Kabsch, no scale)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    H = (src - mu_s).T @ (dst - mu_d)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0])
    R = Vt.T @ D @ U.T
    return PoseSE3.from_rt(R, mu_d - R @ mu_s)


def align_trajectories(est: Trajectory, gt: Trajectory, max_dt=MAX_DT):
    """Rigidly align ``est`` onto ``gt`` over associated positions.

    Returns ``(aligned, transform)`` with ``aligned = transform o est``.
    """
    pairs = associate(est, gt, max_dt)
    if len(pairs) < 3:
        raise InsufficientDataError(f"need at least 3 associated poses, got {len(pairs)}")
    ie, ig = np.array(pairs).T
    T = rigid_transform(est.positions[ie], gt.positions[ig])
    aligned = Trajectory(est.timestamps.copy(), [compose(T, p) for p in est.poses])
    return aligned, T


@dataclass(frozen=True, eq=False)
class MetricReport:
    rmse: float
    mean: float
    median: float
    std: float  # population
    sse: float
    errors: np.ndarray
    rmse_literal: float  # sqrt of the mean of unsquared norms

    def as_row(self):
        return [getattr(self, c) for c in REPORT_COLUMNS]


def error_statistics(errors) -> MetricReport:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise InsufficientDataError("no associated poses to evaluate")
    return MetricReport(float(np.sqrt(np.mean(e * e))), float(e.mean()), float(np.median(e)),
                        float(e.std()), float(np.sum(e * e)), e, float(np.sqrt(e.mean())))


def compute_rmse(est: Trajectory, gt: Trajectory, max_dt=MAX_DT) -> MetricReport:
    """Position-error statistics over associated poses; no alignment is applied."""
    pairs = associate(est, gt, max_dt)
    if not pairs:
        raise InsufficientDataError("no poses associated within "
                                    f"{max_dt * 1e3:g} ms")
    ie, ig = np.array(pairs).T
    return error_statistics(np.linalg.norm(est.positions[ie] - gt.positions[ig], axis=1))


def evaluate(est: Trajectory, gt: Trajectory, align=True, max_dt=MAX_DT) -> MetricReport:
    if align:
        est, _ = align_trajectories(est, gt, max_dt)
    return compute_rmse(est, gt, max_dt)


def drift_residual(est_first: PoseSE3, est_last: PoseSE3, tag_first: PoseSE3,
                   tag_last: PoseSE3) -> PoseSE3:
    """``(tag_first^-1 tag_last)^-1 (est_first^-1 est_last)``.

    All four poses map camera coordinates into their own fixed frame (the
    odometry world or the tag), so both brackets are the first-from-last
    camera motion and the residual is the identity for a perfect estimate.
    """
    tag_rel = compose(tag_first.inverse(), tag_last)
    est_rel = compose(est_first.inverse(), est_last)
    return compose(tag_rel.inverse(), est_rel)


def drift_error(est_first, est_last, tag_first, tag_last) -> float:
    """Translation norm (meters) of the drift residual."""
    return float(np.linalg.norm(drift_residual(est_first, est_last, tag_first, tag_last).translation))


def drift_rotation_deg(est_first, est_last, tag_first, tag_last) -> float:
    res = drift_residual(est_first, est_last, tag_first, tag_last)
    return float(np.rad2deg(rotation_angle(res.rotation)))


def nearest_pose(traj: Trajectory, t, max_dt=MAX_DT) -> PoseSE3:
    if len(traj) == 0:
        raise InsufficientDataError("empty trajectory")
    k = int(np.argmin(np.abs(traj.timestamps - t)))
    if abs(traj.timestamps[k] - t) > max_dt:
        raise InsufficientDataError(f"no pose within {max_dt * 1e3:g} ms of t={t}")
    return traj.poses[k]


def drift_from_trajectories(est: Trajectory, tags: Trajectory, max_dt=MAX_DT):
    """Drift between the first and last tag observations: ``(meters, degrees)``."""
    if len(tags) < 2:
        raise InsufficientDataError("tag trajectory needs a first and a last pose")
    t0, t1 = tags.timestamps[0], tags.timestamps[-1]
    args = (nearest_pose(est, t0, max_dt), nearest_pose(est, t1, max_dt),
            tags.poses[0], tags.poses[-1])
    return drift_error(*args), drift_rotation_deg(*args)


# --- output ----------------------------------------------------------------------

def write_report_csv(report: MetricReport, path, label=None):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow((["sequence"] if label is not None else []) + list(REPORT_COLUMNS))
        w.writerow(([label] if label is not None else []) + [repr(v) for v in report.as_row()])


def format_report(report: MetricReport) -> str:
    lines = [f"{c:>8s}  {getattr(report, c):.6f} m" + ("²" if c == "sse" else "")
             for c in REPORT_COLUMNS]
    lines.append(f"   poses  {len(report.errors)}")
    return "\n".join(lines)


def polyline(traj: Trajectory) -> np.ndarray:
    """Positions with consecutive duplicates removed."""
    pts = traj.positions
    if len(pts) < 2:
        return pts
    keep = np.concatenate([[True], np.any(pts[1:] != pts[:-1], axis=1)])
    return pts[keep]


def plot_rows(trajectories, labels, reference: Trajectory | None = None, max_dt=MAX_DT):
    """``(label, index, x, y, z)`` rows; each input is aligned to ``reference`` if given."""
    rows = []
    for traj, label in zip(trajectories, labels):
        if reference is not None and traj is not reference:
            traj, _ = align_trajectories(traj, reference, max_dt)
        for k, p in enumerate(polyline(traj)):
            rows.append((label, k, *p))
    return rows


def write_plot_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["label", "index", "x", "y", "z"])
        for label, k, x, y, z in rows:
            w.writerow([label, k, repr(float(x)), repr(float(y)), repr(float(z))])
