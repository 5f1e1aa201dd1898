"""Realizing a relative next-best-view in the global frame.

The camera follows the gradient flow of

    psi(r, R) = |r - r*|^2 + |R^T z - e3|^2

on R^3 x SO(3), optionally augmented with field-of-view barrier potentials
so that every target estimate stays visible to both cameras.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateGoal, OutOfFov, StepDiverged
from .geometry import E3, Pose, nearest_rotation, skew, vee
from .stereo_model import CameraRig

__all__ = [
    "Pose", "GoalSpec", "BarrierConfig", "FlowConfig", "FlowResult",
    "goal_from_nbv", "psi", "grad_psi_r", "grad_psi_R", "fov_contains", "barriers",
    "psi_hat", "grad_psi_hat", "integrate_flow",
]


def _inv(a):
    return 1.0 / a


def _dinv(a):
    return -1.0 / (a * a)


@dataclass(frozen=True)
class GoalSpec:
    r_star: np.ndarray
    x_hat_o: np.ndarray
    z_hat: np.ndarray

    @classmethod
    def toward(cls, r_star, x_hat_o) -> GoalSpec:
        r_star = np.asarray(r_star, dtype=float)
        x_hat_o = np.asarray(x_hat_o, dtype=float)
        diff = x_hat_o - r_star
        dist = np.linalg.norm(diff)
        if dist < 1e-9:
            raise DegenerateGoal("objective target coincides with the goal position")
        return cls(r_star, x_hat_o, diff / dist)


@dataclass
class BarrierConfig:
    """Penalty weight ``rho`` and barrier ``g`` with derivative ``dg``."""

    rho: float = 100.0
    g: Callable = _inv
    dg: Callable = _dinv

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be non-negative")


@dataclass
class FlowConfig:
    """Discretization of the pose flow.

    ``step``/``duration`` are in flow time.  The flow also stops when the
    gradient norm drops below ``grad_tol``, when psi_hat drops below
    ``psi_tol``, or when the camera has moved ``max_travel`` (if set).
    ``planar_axis`` (global unit vector) restricts translation to the plane
    orthogonal to it and rotation to rotations about it.
    """

    step: float = 1e-3
    duration: float = 10.0
    retraction_interval: int = 1
    psi_tol: float = 1e-12
    grad_tol: float = 1e-9
    max_halvings: int = 40
    max_travel: float | None = None
    planar_axis: np.ndarray | None = None

    def __post_init__(self):
        if not (self.step > 0 and self.duration >= self.step):
            raise ValueError("need step > 0 and duration >= step")
        if self.retraction_interval < 1:
            raise ValueError("retraction_interval must be >= 1")
        if self.planar_axis is not None:
            a = np.asarray(self.planar_axis, dtype=float)
            self.planar_axis = a / np.linalg.norm(a)


@dataclass
class FlowResult:
    positions: np.ndarray        # (N, 3)
    rotations: np.ndarray        # (N, 3, 3)
    values: np.ndarray           # psi_hat along the trajectory
    times: np.ndarray
    path_length: float
    reason: str                  # "duration", "converged", "travel"

    @property
    def final(self) -> Pose:
        return Pose(self.positions[-1], nearest_rotation(self.rotations[-1]))

    def __len__(self) -> int:
        return len(self.values)


def goal_from_nbv(pose_prev: Pose, p_prev, p_next, x_hat_o) -> GoalSpec:
    """Goal pose that shows the objective target at ``p_next`` instead of ``p_prev``.

    With R held fixed, moving the relative point by dp requires moving the
    camera by -R dp.
    """
    dp = np.asarray(p_next, dtype=float) - np.asarray(p_prev, dtype=float)
    r_star = pose_prev.r - pose_prev.rot @ dp
    return GoalSpec.toward(r_star, x_hat_o)


def psi(pose: Pose, goal: GoalSpec) -> float:
    dr = pose.r - goal.r_star
    v = pose.rot.T @ goal.z_hat - E3
    return float(dr @ dr + v @ v)


def grad_psi_r(pose: Pose, goal: GoalSpec) -> np.ndarray:
    return 2.0 * (pose.r - goal.r_star)


def grad_psi_R(pose: Pose, goal: GoalSpec) -> np.ndarray:
    """Skew-symmetric gradient R^T z v^T - v z^T R with v = R^T z - e3."""
    rz = pose.rot.T @ goal.z_hat
    v = rz - E3
    a = np.outer(rz, v)
    return a - a.T


def fov_contains(rig: CameraRig, p) -> bool:
    """Whether the camera-frame point ``p`` is visible to both cameras."""
    x, y, z = np.asarray(p, dtype=float)
    b, f, w = rig.baseline, rig.focal, rig.width
    return bool(z > b * f / w and abs(x) <= (w * z - b * f) / (2 * f) and abs(y) <= z * w / (2 * f))


def _barrier_terms(rig: CameraRig, r, rot, targets):
    p = (np.atleast_2d(np.asarray(targets, dtype=float)) - r) @ rot
    c = rig.width / (2 * rig.focal)
    half_b = rig.baseline / 2
    zmin = rig.baseline * rig.focal / rig.width
    lateral = c * p[:, 2] - half_b
    phi = np.column_stack([
        lateral**2 - p[:, 0] ** 2,
        (c * p[:, 2]) ** 2 - p[:, 1] ** 2,
        p[:, 2] ** 2 - zmin**2,
    ])
    return p, phi, c, lateral


def barriers(rig: CameraRig, pose: Pose, target_estimates) -> np.ndarray:
    """FoV potentials (phi_1, phi_2, phi_3) per target, shape (n, 3)."""
    return _barrier_terms(rig, pose.r, pose.rot, target_estimates)[1]


def _psi_raw(r, rot, goal):
    dr = r - goal.r_star
    v = rot.T @ goal.z_hat - E3
    return dr @ dr + v @ v


def _psi_hat_raw(r, rot, goal, rig, targets, cfg):
    val = _psi_raw(r, rot, goal)
    if cfg.rho == 0 or len(targets) == 0:
        return float(val)
    p, phi, _, _ = _barrier_terms(rig, r, rot, targets)
    if np.any(phi <= 0) or np.any(p[:, 2] <= 0):
        raise OutOfFov("a target estimate is outside the stereo field of view")
    return float(val + cfg.rho / len(p) * np.sum(cfg.g(phi)))


def _grad_psi_hat_raw(r, rot, goal, rig, targets, cfg):
    gr = 2.0 * (r - goal.r_star)
    rz = rot.T @ goal.z_hat
    a = np.outer(rz, rz - E3)
    g_rot = a - a.T
    if cfg.rho == 0 or len(targets) == 0:
        return gr, g_rot
    p, phi, c, lateral = _barrier_terms(rig, r, rot, targets)
    if np.any(phi <= 0) or np.any(p[:, 2] <= 0):
        raise OutOfFov("a target estimate is outside the stereo field of view")
    dg = cfg.dg(phi)
    # sum_j g'(phi_ij) d phi_ij / d p_i, in camera coordinates
    coef = np.column_stack([
        -2.0 * p[:, 0] * dg[:, 0],
        -2.0 * p[:, 1] * dg[:, 1],
        2.0 * c * lateral * dg[:, 0] + 2.0 * c * c * p[:, 2] * dg[:, 1] + 2.0 * p[:, 2] * dg[:, 2],
    ])
    scale = cfg.rho / len(p)
    gr = gr - scale * (rot @ coef.sum(axis=0))
    m = 0.5 * (p.T @ coef)           # sum_i p_i a_i^T / 2
    g_rot = g_rot + scale * (m - m.T)
    return gr, g_rot


def psi_hat(pose: Pose, goal: GoalSpec, rig: CameraRig, target_estimates,
            cfg: BarrierConfig) -> float:
    return _psi_hat_raw(pose.r, pose.rot, goal, rig, _targets(target_estimates), cfg)


def grad_psi_hat(pose: Pose, goal: GoalSpec, rig: CameraRig, target_estimates,
                 cfg: BarrierConfig) -> tuple[np.ndarray, np.ndarray]:
    """Translational gradient and skew-symmetric rotational gradient of psi_hat."""
    return _grad_psi_hat_raw(pose.r, pose.rot, goal, rig, _targets(target_estimates), cfg)


def _targets(target_estimates) -> np.ndarray:
    t = np.asarray(target_estimates, dtype=float)
    return t.reshape(-1, 3)


def integrate_flow(pose0: Pose, goal: GoalSpec, rig: CameraRig, target_estimates,
                   barrier_cfg: BarrierConfig, flow_cfg: FlowConfig) -> FlowResult:
    """Forward-Euler integration of r' = -grad_r psi_hat, R' = -R grad_R psi_hat.

    A step is accepted only if psi_hat does not increase by more than
    1e-9 * step; otherwise the step is halved.  R is projected back onto
    SO(3) every ``retraction_interval`` steps.
    """
    targets = _targets(target_estimates)
    cfg = flow_cfg
    r, rot = pose0.r.copy(), pose0.rot.copy()
    val = _psi_hat_raw(r, rot, goal, rig, targets, barrier_cfg)
    axis = cfg.planar_axis
    positions, rotations, values, times = [r.copy()], [rot.copy()], [val], [0.0]
    t, path, n_steps = 0.0, 0.0, 0
    reason = "duration"
    eye = np.eye(3)
    while t < cfg.duration * (1 - 1e-12):
        if val < cfg.psi_tol:
            reason = "converged"
            break
        gr, g_rot = _grad_psi_hat_raw(r, rot, goal, rig, targets, barrier_cfg)
        if axis is not None:
            gr = gr - (gr @ axis) * axis
            b = rot.T @ axis
            g_rot = skew((vee(g_rot) @ b) * b)
        if np.sqrt(gr @ gr + 0.5 * np.sum(g_rot * g_rot)) < cfg.grad_tol:
            reason = "converged"
            break
        h = min(cfg.step, cfg.duration - t)
        retract = (n_steps + 1) % cfg.retraction_interval == 0
        for _ in range(cfg.max_halvings):
            dr = -h * gr
            out_of_budget = False
            if cfg.max_travel is not None:
                room = cfg.max_travel - path
                ln = np.linalg.norm(dr)
                if ln >= room:
                    dr = dr * (max(room, 0.0) / ln)
                    out_of_budget = True
            r_new = r + dr
            rot_new = rot @ (eye - h * g_rot)
            if retract:
                rot_new = nearest_rotation(rot_new)
            try:
                val_new = _psi_hat_raw(r_new, rot_new, goal, rig, targets, barrier_cfg)
            except OutOfFov:
                val_new = np.inf
            if val_new <= val + 1e-9 * h:
                break
            h /= 2
        else:
            raise StepDiverged(f"no descent step found at t={t:.6g} (psi_hat={val:.6g})")
        path += float(np.linalg.norm(r_new - r))
        r, rot, val = r_new, rot_new, val_new
        t += h
        n_steps += 1
        positions.append(r.copy())
        rotations.append(rot.copy())
        values.append(val)
        times.append(t)
        if out_of_budget:
            reason = "travel"
            break
    return FlowResult(np.array(positions), np.array(rotations), np.array(values),
                      np.array(times), path, reason)
