"""Stereo-camera next-best-view planning for multi-target localization.

Submodules:

- ``stereo_model``: projection, quantization, triangulation and its covariance
- ``kalman``: per-target Kalman filter and the closed-form fused covariance
- ``nbv_planner``: uncertainty potential, its gradient, and the relative NBV
- ``pose_controller``: SO(3) x R^3 gradient flow with field-of-view barriers
- ``noise_calibration``: pixel bias regression and empirical pixel noise
- ``sim``: closed-loop trials, baselines, batch comparison
"""

from .geometry import Pose, look_at
from .stereo_model import CameraRig

__all__ = ["CameraRig", "Pose", "look_at"]
__version__ = "0.1.0"
