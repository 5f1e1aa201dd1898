"""Closed-loop execution of one scenario: observe, filter, plan, move."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InitialPoseOutOfFov, NonPositiveDisparity, StereoNbvError
from ..geometry import Pose, rotation_to_quat
from ..kalman import TargetFilter, phi_const_accel, phi_static, process_noise
from ..nbv_planner import Objective
from ..noise_calibration import RegressionModel, correct
from ..pose_controller import fov_contains
from ..stereo_model import measurement_covariance, project, quantize, to_global, triangulate
from .controllers import (Grid, Prediction, StraightLatch, circle_baseline_step,
                          grid_heuristic_step, nbv_step, straight_baseline_step)
from .scenario import Controller, Scenario, TargetMotion
from .targets import olympic_targets, uniform_cube

log = logging.getLogger(__name__)

CSV_HEADER = ["trial", "iter", "controller", "target_id", "error", "trace", "objective",
              "rx", "ry", "rz", "qw", "qx", "qy", "qz"]


@dataclass
class TrialRow:
    trial: int
    iter: int
    controller: str
    target_id: int
    error: float
    trace: float
    objective: float
    r: np.ndarray
    quat: np.ndarray

    def csv_fields(self) -> list[str]:
        vals = [self.error, self.trace, self.objective, *self.r, *self.quat]
        return [str(self.trial), str(self.iter), self.controller, str(self.target_id),
                *(_fmt(v) for v in vals)]


def _fmt(v: float) -> str:
    return repr(float(v))


@dataclass
class TrialResult:
    controller: Controller
    seed: int
    rows: list[TrialRow] = field(default_factory=list)
    displacements: list[float] = field(default_factory=list)
    halted_at: int | None = None
    aborted: str | None = None
    trial: int = 0

    @property
    def n_targets(self) -> int:
        return 1 + max(r.target_id for r in self.rows) if self.rows else 0

    def _matrix(self, attr: str) -> np.ndarray:
        rows = [r for r in self.rows if r.target_id >= 0]
        n_iter = 1 + max(r.iter for r in rows)
        out = np.full((n_iter, self.n_targets), np.nan)
        for r in rows:
            out[r.iter, r.target_id] = getattr(r, attr)
        return out

    @property
    def errors(self) -> np.ndarray:
        """Localization error per (iteration, target)."""
        return self._matrix("error")

    @property
    def traces(self) -> np.ndarray:
        return self._matrix("trace")

    @property
    def objective(self) -> np.ndarray:
        return self._matrix("objective")[:, 0]

    @property
    def positions(self) -> np.ndarray:
        """Camera position at each observation."""
        seen = {}
        for r in self.rows:
            seen.setdefault(r.iter, r.r)
        return np.array([seen[k] for k in sorted(seen)])

    @property
    def path_length(self) -> float:
        p = self.positions
        return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))

    def to_csv(self, header: bool = True) -> str:
        return rows_to_csv(self.rows, header)


def rows_to_csv(rows, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def initial_targets(scenario: Scenario, rng: np.random.Generator):
    """Ground-truth position function t -> (n, 3) for the scenario."""
    n = scenario.n_targets
    if scenario.target_motion is TargetMotion.OLYMPIC_RINGS:
        if scenario.randomize_ring_phases:
            phases = rng.uniform(0, 2 * np.pi, n)
        else:
            phases = np.zeros(n)
        trajs = scenario.rings.trajectories(n, phases)
        return lambda t: olympic_targets(t, trajs)
    lay = scenario.target_layout
    if lay.kind == "fixed":
        pts = lay.positions.copy()
    else:
        pts = uniform_cube(rng, n, lay.center, lay.size)
    return lambda t: pts


def _objective_value(controller: Controller, covs: np.ndarray) -> float:
    if controller is Controller.NBV_CENTROID:
        return float(np.trace(covs.mean(axis=0)))
    return float(np.max(np.trace(covs, axis1=1, axis2=2)))


def run_trial(scenario: Scenario, *, budgets=None, correction: RegressionModel | None = None,
              path_budget: float | None = None, trial: int = 0) -> TrialResult:
    """Run ``scenario`` once; deterministic given ``scenario.seed``.

    ``budgets`` optionally overrides the per-iteration travel distance of the
    straight and circle baselines (used to match NBV travel in comparisons).
    ``correction`` applies a fitted pixel correction model to every raw
    observation before triangulation.  ``path_budget`` caps the total
    distance the grid controllers may travel.
    """
    sc = scenario
    ctrl = sc.controller
    layout_rng = np.random.default_rng([sc.seed, 0])
    noise_rng = np.random.default_rng([sc.seed, 1])
    truth_at = initial_targets(sc, layout_rng)
    rig = sc.rig
    q = sc.pixel_noise if correction is None else correction.q

    if sc.target_motion is TargetMotion.STATIC:
        phi = phi_static()
    else:
        phi = phi_const_accel(sc.dt)
    w = process_noise(sc.dt, sc.process_noise_scale) if sc.process_noise_scale > 0 else np.zeros((9, 9))

    pose = sc.initial_pose.copy()
    truth0 = truth_at(0.0)
    rel0 = pose.relative(truth0)
    if not all(fov_contains(rig, p) for p in rel0):
        raise InitialPoseOutOfFov("some targets start outside the stereo field of view")

    filters = [TargetFilter(sc.init_var) for _ in range(sc.n_targets)]
    latch = StraightLatch(sc.straight_halt_fraction)
    grid = Grid.SQUARE if ctrl is Controller.GRID_SQUARE else Grid.TRIANGULAR
    result = TrialResult(ctrl, sc.seed, trial=trial)
    obs_noise = sc.observation_noise
    add_noise = bool(np.any(obs_noise))
    circle_center = None
    path_left = np.inf if path_budget is None else float(path_budget)

    for k in range(sc.n_observations):
        truth = truth_at(k * sc.dt)
        try:
            for i, x in enumerate(truth):
                p = pose.relative(x)
                if not fov_contains(rig, p):
                    if not filters[i].initialized:
                        raise InitialPoseOutOfFov(f"target {i} never observed")
                    # not visible: time update only
                    filters[i].state, filters[i].cov = filters[i].predicted(phi, w)
                    continue
                px = project(rig, p)
                if add_noise:
                    px = px + noise_rng.multivariate_normal(np.zeros(3), obs_noise)
                if sc.quantize:
                    px = quantize(px)
                if correction is not None:
                    px = correct(px, correction)
                try:
                    meas = to_global(pose, triangulate(rig, px))
                    sigma = measurement_covariance(rig, px, pose.rot, q)
                except NonPositiveDisparity:
                    if not filters[i].initialized:
                        raise
                    filters[i].state, filters[i].cov = filters[i].predicted(phi, w)
                    continue
                filters[i].step(meas, sigma, phi, w)
        except StereoNbvError as exc:
            return _abort(result, k, pose, exc)

        covs = np.array([f.position_cov for f in filters])
        obj_val = _objective_value(ctrl, covs)
        quat = rotation_to_quat(pose.rot)
        for i, f in enumerate(filters):
            result.rows.append(TrialRow(trial, k, ctrl.value, i,
                                        float(np.linalg.norm(f.position - truth[i])),
                                        float(np.trace(covs[i])), obj_val, pose.r.copy(), quat))
        if k == sc.n_observations - 1:
            break

        preds = [f.predicted(phi, w) for f in filters]
        pred = Prediction(np.array([z[:3] for z, _ in preds]),
                          np.array([u[:3, :3] for _, u in preds]))
        budget = sc.planner_cfg.max_travel
        if budgets is not None:
            budget = float(budgets[k])
        try:
            if ctrl.is_nbv:
                objective = Objective.SUPREMUM if ctrl is Controller.NBV_SUPREMUM else Objective.CENTROID
                new_pose = nbv_step(pose, pred, objective, rig, q, sc.planner_cfg, sc.barrier_cfg,
                                    sc.flow_cfg, up=sc.up, planar=sc.planar).pose
            elif ctrl is Controller.STRAIGHT_BASELINE:
                was_halted = latch.halted
                new_pose = straight_baseline_step(pose, pred, budget, rig, latch, sc.up)
                if latch.halted and not was_halted:
                    result.halted_at = k
            elif ctrl is Controller.CIRCLE_BASELINE:
                if circle_center is None:
                    circle_center = pred.centroid
                new_pose = circle_baseline_step(pose, circle_center, budget, sc.up)
            else:
                new_pose, _ = grid_heuristic_step(pose, pred, grid, sc.grid_edge, rig, q, sc.up,
                                                  max_move=path_left)
        except StereoNbvError as exc:
            return _abort(result, k, pose, exc)
        moved = float(np.linalg.norm(new_pose.r - pose.r))
        path_left -= moved
        result.displacements.append(moved)
        pose = new_pose
    return result


def _abort(result: TrialResult, k: int, pose: Pose, exc: Exception) -> TrialResult:
    log.warning("trial %d (%s, seed %d) aborted at iteration %d: %s",
                result.trial, result.controller.value, result.seed, k, exc)
    result.aborted = f"{type(exc).__name__}: {exc}"
    result.rows.append(TrialRow(result.trial, k, result.controller.value, -1, np.nan, np.nan,
                                np.nan, pose.r.copy(), rotation_to_quat(pose.rot)))
    return result
