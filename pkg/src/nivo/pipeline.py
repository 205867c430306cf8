"""Three-stage odometry frontend: normals -> rotation -> translation.

Each stage owns its own keyframe. The rotation stage tracks planes against
its keyframe normal map; the translation stage rotates the current cloud
into its keyframe orientation, projects it and correlates. Stages talk
through bounded FIFOs, so a slow stage back-pressures the others and no
frame is ever dropped. The same stage objects run sequentially in
single-thread mode, which is what makes both modes produce identical output.
"""
from __future__ import annotations

import csv
import logging
import queue
import threading
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import kcc
from .errors import ConfigError, LoadError
from .geometry import Frame, PointCloud, PoseSE3, align_cloud, backproject, compose
from .io import Trajectory
from .normals import NormalMap, NormalMapParams, compute_normal_map
from .planes import PlaneTrackerParams, coverage, track_planes
from .rotation import RotationParams, estimate_rotation
from .translation import (AxonometricFrame, ProjectionConfig, TranslationParams,
                          estimate_translation, project_axonometric, train_keyframe)

log = logging.getLogger(__name__)

CASE_INIT = "init"
CASE_SKIPPED = "skipped"


@dataclass(frozen=True)
class PipelineConfig:
    normals: NormalMapParams = NormalMapParams()
    planes: PlaneTrackerParams = PlaneTrackerParams()
    rotation: RotationParams = RotationParams()
    kcc: kcc.KccParams = kcc.KccParams()
    projection: ProjectionConfig = ProjectionConfig()
    translation: TranslationParams = TranslationParams()
    coverage_fraction: float = 0.5
    buffer_size: int = 4

    def __post_init__(self):
        if not 0 < self.coverage_fraction <= 1:
            raise ConfigError(f"pipeline.coverage_fraction must be in (0, 1], got {self.coverage_fraction}")
        if self.buffer_size < 1:
            raise ConfigError(f"pipeline.buffer_size must be >= 1, got {self.buffer_size}")


@dataclass
class FrameDiagnostics:
    frame_id: int
    timestamp: float
    case_tag: str = CASE_INIT
    residual_deg: float = 0.0
    psr: float = float("nan")
    modes: int = 0
    rotation_fallback: bool = False
    translation_fallback: bool = False
    rotation_keyframe: bool = False
    translation_keyframe: bool = False
    skipped: bool = False
    normal_ms: float = 0.0
    rotation_ms: float = 0.0
    translation_ms: float = 0.0


LATENCY_COLUMNS = ("normal_ms", "rotation_ms", "translation_ms")
DIAGNOSTIC_COLUMNS = tuple(f.name for f in fields(FrameDiagnostics))


@dataclass(frozen=True)
class KeyframeDecision:
    rotation: bool
    translation: bool


def translation_refresh(psr, config: PipelineConfig = PipelineConfig()) -> bool:
    """The match confidence fell below the PSR threshold."""
    return not psr >= config.translation.psr_keyframe_threshold


def rotation_refresh(mode_coverage, initial_coverage, n_modes,
                     config: PipelineConfig = PipelineConfig()) -> bool:
    """Fewer than two Modes, or coverage below ``coverage_fraction`` of the initial value."""
    return n_modes < 2 or mode_coverage < config.coverage_fraction * initial_coverage


def keyframe_policy(psr, mode_coverage, initial_coverage, n_modes,
                    config: PipelineConfig = PipelineConfig()) -> KeyframeDecision:
    """Independent refresh decisions for the rotation and translation keyframes."""
    return KeyframeDecision(rotation_refresh(mode_coverage, initial_coverage, n_modes, config),
                            translation_refresh(psr, config))


# --- messages -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormalMessage:
    frame: Frame
    cloud: PointCloud
    normal_map: NormalMap
    diag: FrameDiagnostics


@dataclass(frozen=True, eq=False)
class RotationMessage:
    frame: Frame
    cloud: PointCloud
    rotation: np.ndarray  # world <- current
    degraded: bool
    diag: FrameDiagnostics


@dataclass(frozen=True, eq=False)
class SkippedMessage:
    diag: FrameDiagnostics


# --- stages ----------------------------------------------------------------------

class NormalStage:
    def __init__(self, config: PipelineConfig):
        self.config = config

    def process(self, frame: Frame) -> NormalMessage:
        t0 = time.perf_counter()
        cloud = backproject(frame.depth, frame.intrinsics)
        nm = compute_normal_map(cloud, self.config.normals)
        diag = FrameDiagnostics(frame.frame_id, frame.timestamp)
        diag.normal_ms = (time.perf_counter() - t0) * 1e3
        return NormalMessage(frame, cloud, nm, diag)


class RotationStage:
    """Keyframe-relative rotation with a previous-frame bridge.

    When the keyframe no longer yields an estimate the current frame is
    matched against the previous frame instead; if that fails too the
    previous orientation is held and the frame is flagged.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.key: NormalMap | None = None
        self.key_rotation = np.eye(3)
        self.initial_coverage = 0
        self.prev: NormalMap | None = None
        self.prev_rotation = np.eye(3)

    def _set_keyframe(self, nm: NormalMap, R_w):
        self.key = nm
        self.key_rotation = R_w
        self.initial_coverage = coverage(track_planes(nm, nm, self.config.planes))

    def process(self, msg: NormalMessage) -> RotationMessage:
        t0 = time.perf_counter()
        diag, nm = msg.diag, msg.normal_map
        cfg = self.config
        degraded = False
        if self.key is None:
            R_w = np.eye(3)
            self._set_keyframe(nm, R_w)
            diag.rotation_keyframe = True
        else:
            modes = track_planes(self.key, nm, cfg.planes)
            est = estimate_rotation(modes, cfg.rotation)
            refresh = False
            if not est.fallback:
                R_w = self.key_rotation @ est.rotation
                cov = coverage(modes)
                refresh = rotation_refresh(cov, self.initial_coverage, len(modes), cfg)
            else:
                refresh = True
                if self.prev is not self.key:
                    modes = track_planes(self.prev, nm, cfg.planes)
                    est = estimate_rotation(modes, cfg.rotation)
                if not est.fallback:
                    R_w = self.prev_rotation @ est.rotation
                else:
                    R_w = self.prev_rotation
                    degraded = True
            diag.case_tag = est.case_tag
            diag.residual_deg = float(np.rad2deg(est.residual))
            diag.modes = len(modes)
            diag.rotation_fallback = degraded
            if refresh:
                self._set_keyframe(nm, R_w)
                diag.rotation_keyframe = True
        self.prev, self.prev_rotation = nm, R_w
        diag.rotation_ms = (time.perf_counter() - t0) * 1e3
        return RotationMessage(msg.frame, msg.cloud, R_w, degraded, diag)


class TranslationStage:
    """Keyframe-relative translation; owns the trajectory."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.key: AxonometricFrame | None = None
        self.model: kcc.KccModel | None = None
        self.key_pose = PoseSE3.identity()
        self.prev_translation = np.zeros(3)
        self.trajectory = Trajectory()
        self.diagnostics: list[FrameDiagnostics] = []

    def _set_keyframe(self, msg: RotationMessage, pose: PoseSE3):
        # the keyframe is projected in its own orientation
        self.key = project_axonometric(msg.cloud, msg.frame.intensity, self.config.projection)
        self.model = train_keyframe(self.key, self.config.kcc)
        self.key_pose = pose

    def process(self, msg):
        if isinstance(msg, SkippedMessage):
            self.diagnostics.append(msg.diag)
            return None
        t0 = time.perf_counter()
        diag, cfg = msg.diag, self.config
        if self.key is None:
            pose = PoseSE3.from_rt(msg.rotation, np.zeros(3))
            self._set_keyframe(msg, pose)
            diag.translation_keyframe = True
        else:
            R_kc = self.key_pose.rotation.T @ msg.rotation
            aligned = align_cloud(msg.cloud, R_kc)
            cur = project_axonometric(aligned, msg.frame.intensity, cfg.projection)
            est = estimate_translation(self.key, cur, self.model, cfg.projection, cfg.translation)
            diag.psr = est.psr
            if est.ok:
                pose = compose(self.key_pose, PoseSE3.from_rt(R_kc, est.translation))
                refresh = translation_refresh(est.psr, cfg)
            else:
                # no estimate: hold the position, keep the rotation, restart from here
                pose = PoseSE3.from_rt(msg.rotation, self.prev_translation)
                diag.translation_fallback = True
                refresh = True
            if refresh:
                self._set_keyframe(msg, pose)
                diag.translation_keyframe = True
        self.prev_translation = pose.translation
        self.trajectory.append(msg.frame.timestamp, pose)
        diag.translation_ms = (time.perf_counter() - t0) * 1e3
        self.diagnostics.append(diag)
        return pose


# --- orchestration ---------------------------------------------------------------

@dataclass
class PipelineResult:
    trajectory: Trajectory
    diagnostics: list = field(default_factory=list)

    def relative_poses(self):
        """Frame-to-frame motions ``T_prev^-1 T_cur``."""
        poses = self.trajectory.poses
        return [a.inverse() @ b for a, b in zip(poses[:-1], poses[1:])]


def _frames(source, max_frames=None):
    """Yield frames or ``SkippedMessage`` for frames that fail to decode."""
    if hasattr(source, "load_frame") and hasattr(source, "__len__"):
        n = len(source) if max_frames is None else min(len(source), max_frames)
        stamps = getattr(source, "timestamps", None)
        for i in range(n):
            try:
                yield source.load_frame(i)
            except LoadError as e:
                log.warning("frame %d skipped: %s", i, e)
                t = float(stamps[i]) if stamps is not None else float("nan")
                yield SkippedMessage(FrameDiagnostics(i, t, CASE_SKIPPED, skipped=True))
    else:
        for i, frame in enumerate(source):
            if max_frames is not None and i >= max_frames:
                break
            yield frame


class _Failure:
    def __init__(self, exc):
        self.exc = exc


_END = object()


def _check_order(frame, last_id, last_t):
    if frame.frame_id <= last_id or frame.timestamp <= last_t:
        raise ConfigError(f"frame {frame.frame_id} at t={frame.timestamp} is out of order")


def run_pipeline(source, config: PipelineConfig = PipelineConfig(), single_thread=False,
                 max_frames=None) -> PipelineResult:
    """Run the odometry over ``source`` (a sequence or an iterable of frames)."""
    stages = NormalStage(config), RotationStage(config), TranslationStage(config)
    if single_thread:
        _run_sequential(source, stages, max_frames)
    else:
        _run_concurrent(source, stages, config.buffer_size, max_frames)
    return PipelineResult(stages[2].trajectory, stages[2].diagnostics)


def _run_sequential(source, stages, max_frames):
    s1, s2, s3 = stages
    last = (-1, -np.inf)
    for item in _frames(source, max_frames):
        if isinstance(item, SkippedMessage):
            s3.process(item)
            continue
        _check_order(item, *last)
        last = (item.frame_id, item.timestamp)
        s3.process(s2.process(s1.process(item)))


def _run_concurrent(source, stages, buffer_size, max_frames):
    s1, s2, s3 = stages
    q1 = queue.Queue(maxsize=buffer_size)
    q2 = queue.Queue(maxsize=buffer_size)
    stop = threading.Event()

    def put(q, item):
        while not stop.is_set():
            try:
                q.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def normal_worker():
        try:
            last = (-1, -np.inf)
            for item in _frames(source, max_frames):
                if not isinstance(item, SkippedMessage):
                    _check_order(item, *last)
                    last = (item.frame_id, item.timestamp)
                    item = s1.process(item)
                if not put(q1, item):
                    return
            put(q1, _END)
        except BaseException as e:  # forwarded to the caller
            put(q1, _Failure(e))

    def rotation_worker():
        try:
            while True:
                item = q1.get()
                if item is _END or isinstance(item, _Failure):
                    put(q2, item)
                    return
                if not isinstance(item, SkippedMessage):
                    item = s2.process(item)
                if not put(q2, item):
                    return
        except BaseException as e:
            put(q2, _Failure(e))

    threads = [threading.Thread(target=normal_worker, name="nivo-normals", daemon=True),
               threading.Thread(target=rotation_worker, name="nivo-rotation", daemon=True)]
    for t in threads:
        t.start()
    try:
        while True:
            item = q2.get()
            if item is _END:
                break
            if isinstance(item, _Failure):
                raise item.exc
            s3.process(item)
    finally:
        stop.set()
        for t in threads:
            t.join()


# --- diagnostics -------------------------------------------------------------------

def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_diagnostics(diagnostics, path, header: str | None = None, include_latency=True):
    """CSV, one row per frame, optionally preceded by a ``#`` header line."""
    cols = [c for c in DIAGNOSTIC_COLUMNS if include_latency or c not in LATENCY_COLUMNS]
    with open(path, "w", newline="") as f:
        if header:
            f.write(header.rstrip("\n") + "\n")
        w = csv.writer(f)
        w.writerow(cols)
        for d in diagnostics:
            row = asdict(d)
            w.writerow([_cell(row[c]) for c in cols])
