"""3D LiDAR Monte Carlo localization fused with scan-matching optimization."""

import logging

from .distance_field import VoxelDistanceField, build as build_field
from .evaluation import RunReport, aggregate, angular_error, evaluate_trajectory, positional_error
from .filters import FilterParams, FilterState, Settings, initialize, step_ekf, step_mmo, step_pff, step_spf
from .geometry import Pose6D, ScanFrame
from .measurement import Model, ModelParams
from .optimizer import OptimizationResult, OptimizerParams, gauss_newton
from .pipeline import METHODS, run_localization
from .simulator import ScanSimParams, generate_world, simulate_run

__version__ = "0.1.0"

# per-step warnings (failed scan matches, degenerate weights) stay silent
# unless the application configures logging
logging.getLogger(__name__).addHandler(logging.NullHandler())
