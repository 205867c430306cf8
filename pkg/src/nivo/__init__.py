"""Decoupled non-iterative RGB-D odometry.

Rotation comes in closed form from plane normals tracked between frames;
translation comes from a kernel cross-correlator on axonometric
projections of the rotation-aligned cloud.
"""
from .config import RunConfig, load_config
from .errors import (ConfigError, DataError, DegeneratePairError, InconsistentPairError,
                     InsufficientDataError, LoadError, NivoError)
from .evaluation import align_trajectories, compute_rmse, drift_error, evaluate
from .geometry import CameraIntrinsics, DepthImage, Frame, PointCloud, PoseSE3, backproject, compose
from .io import Trajectory, load_sequence, read_trajectory, write_trajectory
from .kcc import KccParams, detect, train
from .normals import NormalMap, NormalMapParams, compute_normal_map
from .pipeline import PipelineConfig, run_pipeline
from .planes import PlaneTrackerParams, track_planes
from .rotation import RotationParams, estimate_rotation, rotation_from_pair
from .synthetic import SyntheticSceneSpec, SyntheticSequence, render_synthetic, room_corner_spec
from .translation import ProjectionConfig, TranslationParams, project_axonometric

__version__ = "0.1.0"
