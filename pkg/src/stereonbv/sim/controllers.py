"""Per-iteration motion rules: the hybrid NBV controller and the baselines."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateGoal, NonPositiveDepth, NonPositiveDisparity, SingularCovariance
from ..geometry import Pose, look_at
from ..nbv_planner import NbvConfig, Objective, next_best_view, potential_at, select_objective
from ..pose_controller import (BarrierConfig, FlowConfig, FlowResult, barriers, goal_from_nbv,
                               integrate_flow)
from ..stereo_model import CameraRig


@dataclass
class Prediction:
    """Predicted (next-observation) target estimates handed to a controller."""

    positions: np.ndarray    # (n, 3)
    covs: np.ndarray         # (n, 3, 3) position covariances

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    @property
    def worst(self) -> int:
        return int(np.argmax(np.trace(self.covs, axis1=1, axis2=2)))


def _orient(position, target, up) -> Pose:
    return Pose(position, look_at(position, target, up))


# ---------------------------------------------------------------- NBV

@dataclass
class NbvStep:
    pose: Pose
    flow: FlowResult | None
    p_prev: np.ndarray | None = None
    p_next: np.ndarray | None = None


def nbv_step(pose: Pose, pred: Prediction, objective: Objective, rig: CameraRig, noise,
             planner_cfg: NbvConfig, barrier_cfg: BarrierConfig, flow_cfg: FlowConfig,
             *, up=None, planar: bool = False) -> NbvStep:
    """One iteration of the hybrid controller: relative NBV, then the pose flow.

    The flow stops after ``planner_cfg.max_travel`` of camera motion.  Targets
    whose estimates are already outside the field of view are left out of the
    barrier so the flow starts from an admissible pose.
    """
    obj = select_objective(objective, zip(pred.covs, pred.positions), pose)
    frozen = None
    if planar:
        frozen = pose.rot.T @ np.asarray(up, float)
    try:
        p_next = next_best_view(obj, planner_cfg, rig, pose.rot, noise, frozen_axis=frozen)
        goal = goal_from_nbv(pose, obj.relative_position, p_next, obj.predicted_position)
    except (DegenerateGoal, NonPositiveDepth, NonPositiveDisparity, SingularCovariance):
        return NbvStep(pose.copy(), None)
    phi = barriers(rig, pose, pred.positions)
    rel = pose.relative(pred.positions)
    inside = np.all(phi > 0, axis=1) & (rel[:, 2] > 0)
    fc = dataclasses.replace(flow_cfg, max_travel=planner_cfg.max_travel,
                             planar_axis=np.asarray(up, float) if planar else None)
    flow = integrate_flow(pose, goal, rig, pred.positions[inside], barrier_cfg, fc)
    return NbvStep(flow.final, flow, obj.relative_position, p_next)


# ---------------------------------------------------------------- straight line

@dataclass
class StraightLatch:
    """Halt state of the straight baseline.

    ``thresholds`` are ``halt_fraction`` times the barrier values at the first
    call; once a move would push any barrier below its threshold the
    controller stops for good.
    """

    halt_fraction: float = 0.05
    thresholds: np.ndarray | None = None
    halted: bool = False


def straight_baseline_step(pose: Pose, pred: Prediction, budget: float, rig: CameraRig,
                           latch: StraightLatch, up=(0.0, 0.0, 1.0)) -> Pose:
    """Drive ``budget`` toward the estimated cluster centroid, facing it."""
    if latch.thresholds is None:
        latch.thresholds = latch.halt_fraction * barriers(rig, pose, pred.positions)
    if latch.halted:
        return pose.copy()
    c = pred.centroid
    to_c = c - pose.r
    dist = np.linalg.norm(to_c)
    if dist <= budget:
        latch.halted = True
        return pose.copy()
    cand = _orient(pose.r + budget * to_c / dist, c, up)
    phi = barriers(rig, cand, pred.positions)
    rel = cand.relative(pred.positions)
    if np.any(phi < latch.thresholds) or np.any(rel[:, 2] <= 0):
        latch.halted = True
        return pose.copy()
    return cand


# ---------------------------------------------------------------- circle

def circle_baseline_step(pose: Pose, center, budget: float, up=(0.0, 0.0, 1.0)) -> Pose:
    """Advance ``budget`` of arc length counter-clockwise (about ``up``) on the
    horizontal circle through the current position around ``center``."""
    c = np.asarray(center, float)
    u = np.asarray(up, float) / np.linalg.norm(up)
    rel = pose.r - c
    axial = (rel @ u) * u
    radial = rel - axial
    radius = np.linalg.norm(radial)
    if radius < 1e-12:
        return _orient(pose.r, c, u) if np.linalg.norm(rel) > 0 else pose.copy()
    ang = budget / radius
    tangent = np.cross(u, radial)
    new_radial = math.cos(ang) * radial + math.sin(ang) * tangent
    return _orient(c + axial + new_radial, c, u)


# ---------------------------------------------------------------- grids

class Grid(enum.Enum):
    SQUARE = "square"
    TRIANGULAR = "triangular"


def grid_offsets(grid: Grid, edge: float) -> np.ndarray:
    """Neighbor offsets in the plane (2D), stay-in-place first, then by angle."""
    if Grid(grid) is Grid.SQUARE:
        steps = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
        pts = [(edge * a, edge * b) for a, b in steps]
    else:
        pts = [(edge * math.cos(k * math.pi / 3), edge * math.sin(k * math.pi / 3)) for k in range(6)]
    return np.array([(0.0, 0.0)] + pts)


def plane_basis(up) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(up, float) / np.linalg.norm(up)
    helper = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - (helper @ u) * u
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(u, e1)


def grid_candidates(pose: Pose, grid: Grid, edge: float, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    e1, e2 = plane_basis(up)
    off = grid_offsets(grid, edge)
    return pose.r + off[:, :1] * e1 + off[:, 1:] * e2


def grid_heuristic_step(pose: Pose, pred: Prediction, grid: Grid, edge: float, rig: CameraRig,
                        noise, up=(0.0, 0.0, 1.0), max_move: float = np.inf) -> tuple[Pose, float]:
    """Greedy move to the neighboring grid node (or stay) with the smallest
    predicted fused trace of the worst-localized target.

    At every candidate node the camera faces the worst target's estimate.
    Nodes farther than ``max_move`` are skipped.  Returns the chosen pose and
    its objective value.
    """
    s = pred.worst
    target = pred.positions[s]
    prior = pred.covs[s]
    best, best_val = None, np.inf
    for node in grid_candidates(pose, grid, edge, up):
        if np.linalg.norm(node - pose.r) > max_move + 1e-12:
            continue
        if np.linalg.norm(target - node) < 1e-9:
            continue
        cand = _orient(node, target, up)
        rel = cand.relative(pred.positions)
        if np.any(barriers(rig, cand, pred.positions) <= 0) or np.any(rel[:, 2] <= 0):
            continue
        try:
            val = potential_at(rel[s], prior, rig, cand.rot, noise)
        except (NonPositiveDepth, NonPositiveDisparity, SingularCovariance):
            continue
        if val < best_val:
            best, best_val = cand, val
    if best is None:
        return pose.copy(), np.inf
    return best, best_val
