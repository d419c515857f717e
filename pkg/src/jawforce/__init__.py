"""Dual-jaw force sensing for a surgical grasper: 8-channel sensor
calibration, jaw kinematics, force resolution and synthetic data."""

__version__ = "0.1.0"

from .core import (ChannelFrame, ForceVector, MomentPair, SensorGeometry, ideal_inverse,
                   ideal_inverse_many, ideal_sensitivity, moment_residual)
from .calib import (CalibrationError, CalibrationReport, CalibrationSample, Empty,
                    LengthMismatch, MissingPhase, RankDeficient, SensitivityMatrix,
                    TooFewSamples, apply, calibration_report, fit_sensitivity, hysteresis,
                    nrmsd, r_squared, read_sensitivity, rmse, write_sensitivity)
from .kinematics import (ChainFormatError, ChainMismatch, JawForces, JawState, Transform,
                         TransformChain, corrected_jaw_angle, default_chain, grasp_force,
                         gripper_poses, jaw_poses, read_chain, resultant_force)
from .io import (DualJawLog, ForceStream, LogError, SingleJawLog, align_streams,
                 parse_dual_jaw, parse_single_jaw, write_dual_jaw, write_single_jaw)
from .sim import (LoadProfile, PoseConfig, SimConfig, calibration_runs,
                  manipulation_scenario, pinch_scenario, run_profile, synthesize_frame)
from .pipeline import MountAngles, resolve
