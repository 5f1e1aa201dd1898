"""Rigid poses and small SO(3) helpers.

Camera frame convention: x joins the two camera centers (left to right),
y points down in the image, z is the viewing direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import NotARotation

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def check_rotation(rot: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3):
        raise NotARotation(f"expected a 3x3 matrix, got shape {rot.shape}")
    err = np.linalg.norm(rot.T @ rot - np.eye(3))
    if not np.isfinite(err) or err > tol or np.linalg.det(rot) <= 0:
        raise NotARotation(f"||R^T R - I|| = {err:.3g}, det = {np.linalg.det(rot):.3g}")
    return rot


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Polar projection of ``m`` onto SO(3) (closest rotation in Frobenius norm)."""
    u, _, vt = np.linalg.svd(m)
    if np.linalg.det(u @ vt) < 0:
        u[:, -1] = -u[:, -1]
    return u @ vt


def skew(w: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def vee(s: np.ndarray) -> np.ndarray:
    return np.array([s[2, 1], s[0, 2], s[1, 0]])


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Rotation whose camera z-axis points from ``position`` to ``target``.

    The camera y-axis is chosen as close as possible to ``-up`` (image rows
    grow downward).
    """
    fwd = np.asarray(target, float) - np.asarray(position, float)
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(up, float)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        # looking straight along up; any perpendicular will do
        right = np.cross(fwd, E1 if abs(fwd[0]) < 0.9 else E2)
    right = right / np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.column_stack([right, down, fwd])


def rotation_to_quat(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0."""
    x, y, z, w = Rotation.from_matrix(rot).as_quat()
    q = np.array([w, x, y, z])
    if q[0] < 0 or (q[0] == 0 and q[np.flatnonzero(q)[0]] < 0):
        q = -q
    return q


@dataclass
class Pose:
    """Camera position ``r`` and orientation ``rot`` in the global frame."""

    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rot: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(3)
        self.rot = check_rotation(self.rot)

    @classmethod
    def looking_at(cls, position, target, up=(0.0, 0.0, 1.0)) -> Pose:
        return cls(np.asarray(position, float), look_at(position, target, up))

    def relative(self, x) -> np.ndarray:
        """Global point(s) ``x`` expressed in the camera frame, R^T (x - r)."""
        x = np.asarray(x, dtype=float)
        return (x - self.r) @ self.rot

    def copy(self) -> Pose:
        return Pose(self.r.copy(), self.rot.copy())
