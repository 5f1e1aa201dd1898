"""Rectified stereo rig: projection, pixel quantization, triangulation and
first-order propagation of pixel noise to a 3D measurement covariance.

Image coordinates are centered on the optical axis, pixel centers sit on
integer coordinates, and the row coordinate ``y`` is shared by both images.
Pixel triples are plain length-3 arrays ``(x_L, x_R, y)``; relative points
are length-3 arrays ``(x, y, z)`` in the camera frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepth, NonPositiveDisparity
from .geometry import Pose, check_rotation

DEFAULT_MIN_DISPARITY = 1e-6


@dataclass(frozen=True)
class CameraRig:
    """Two identical pinhole cameras separated by ``baseline`` along x.

    ``focal`` is in pixels, ``width``/``height`` are the image size in pixels
    and ``fov_half_angle`` is the horizontal half field of view in radians.
    """

    baseline: float
    focal: float
    width: float
    height: float
    fov_half_angle: float
    min_disparity: float = DEFAULT_MIN_DISPARITY

    def __post_init__(self):
        if not (self.baseline > 0 and self.focal > 0 and self.width > 0 and self.height > 0):
            raise ValueError("baseline, focal, width and height must be positive")

    @classmethod
    def from_fov(cls, baseline: float, width: float, height: float | None = None,
                 fov_deg: float = 70.0, **kw) -> CameraRig:
        half = math.radians(fov_deg) / 2
        focal = width / (2 * math.tan(half))
        return cls(baseline, focal, width, width if height is None else height, half, **kw)

    @classmethod
    def from_focal(cls, baseline: float, focal: float, width: float,
                   height: float | None = None, **kw) -> CameraRig:
        half = math.atan(width / (2 * focal))
        return cls(baseline, focal, width, width if height is None else height, half, **kw)

    @property
    def min_depth(self) -> float:
        """Depth at which the two viewing pyramids start to overlap, b f / w."""
        return self.baseline * self.focal / self.width


def project(rig: CameraRig, p) -> np.ndarray:
    """Pixel triple of a camera-frame point (inverse of :func:`triangulate`)."""
    p = np.asarray(p, dtype=float)
    if not p[2] > 0:
        raise NonPositiveDepth(f"depth {p[2]!r} <= 0")
    s = rig.focal / p[2]
    half_b = rig.baseline / 2
    return np.array([s * (p[0] + half_b), s * (p[0] - half_b), s * p[1]])


def quantize(px) -> np.ndarray:
    """Round each coordinate to the nearest pixel center (halves away from zero)."""
    px = np.asarray(px, dtype=float)
    return np.sign(px) * np.floor(np.abs(px) + 0.5)


def _disparity(rig: CameraRig, px) -> float:
    d = px[0] - px[1]
    if not d > 0 or d < rig.min_disparity:
        raise NonPositiveDisparity(f"disparity {d!r} is not positive")
    return d


def triangulate(rig: CameraRig, px) -> np.ndarray:
    px = np.asarray(px, dtype=float)
    d = _disparity(rig, px)
    return rig.baseline / d * np.array([(px[0] + px[1]) / 2, px[2], rig.focal])


def jacobian(rig: CameraRig, px) -> np.ndarray:
    """d(triangulate)/d(x_L, x_R, y)."""
    x_l, x_r, y = np.asarray(px, dtype=float)
    d = _disparity(rig, (x_l, x_r))
    f = rig.focal
    return rig.baseline / d**2 * np.array([
        [-x_r, x_l, 0.0],
        [-y, y, d],
        [-f, f, 0.0],
    ])


def jacobian_pixel_derivatives(rig: CameraRig, px) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`jacobian` w.r.t. x_L, x_R and y."""
    x_l, x_r, y = np.asarray(px, dtype=float)
    d = _disparity(rig, (x_l, x_r))
    f, b = rig.focal, rig.baseline
    m = np.array([[-x_r, x_l, 0.0], [-y, y, d], [-f, f, 0.0]])
    c1, c2 = b / d**2, 2 * b / d**3
    dm_dxl = np.array([[0.0, 1, 0], [0, 0, 1], [0, 0, 0]])
    dm_dxr = np.array([[-1.0, 0, 0], [0, 0, -1], [0, 0, 0]])
    dm_dy = np.array([[0.0, 0, 0], [-1, 1, 0], [0, 0, 0]])
    return (-c2 * m + c1 * dm_dxl, c2 * m + c1 * dm_dxr, c1 * dm_dy)


def measurement_covariance(rig: CameraRig, px, rotation, noise) -> np.ndarray:
    """Global-frame covariance R J Q J^T R^T of the point triangulated from ``px``.

    ``noise`` is the 3x3 covariance Q of the pixel errors in (x_L, x_R, y).
    """
    rot = check_rotation(rotation)
    a = rot @ jacobian(rig, px)
    sigma = a @ np.asarray(noise, dtype=float) @ a.T
    return (sigma + sigma.T) / 2


def to_global(pose: Pose, p) -> np.ndarray:
    return pose.rot @ np.asarray(p, dtype=float) + pose.r
