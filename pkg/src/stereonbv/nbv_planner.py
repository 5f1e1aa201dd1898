"""Next-best-view planning in the camera-relative frame.

The uncertainty potential of a candidate relative target position ``p`` is
the trace of the covariance obtained by fusing the target's predicted
position covariance with the stereo measurement covariance that a view from
``p`` would produce.  Its gradient is available in closed form, and the NBV
is obtained by integrating the (gain-scaled) negative gradient.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTargetSet, NonPositiveDepth, NonPositiveDisparity, SingularCovariance
from .geometry import Pose
from .stereo_model import CameraRig, jacobian, jacobian_pixel_derivatives, project

_COND_LIMIT = 1e12


class Objective(enum.Enum):
    SUPREMUM = "supremum"
    CENTROID = "centroid"


@dataclass
class ObjectiveTarget:
    """The (pseudo-)target the planner optimizes for.

    ``index`` is the selected target for the supremum objective and ``None``
    for the centroid pseudo-target.
    """

    prior_cov: np.ndarray
    predicted_position: np.ndarray
    relative_position: np.ndarray
    index: int | None = None


@dataclass
class NbvConfig:
    gain: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 7.0]))
    horizon: float = 1e4
    n_substeps: int = 100
    max_travel: float = 0.1
    max_backtracks: int = 30

    def __post_init__(self):
        self.gain = np.asarray(self.gain, dtype=float)
        if self.gain.shape == (3, 3):
            self.gain = np.diag(self.gain).copy()
        if self.gain.shape != (3,) or np.any(self.gain <= 0):
            raise ValueError("gain must be a positive diagonal")
        if not (self.horizon > 0 and self.n_substeps >= 1 and self.max_travel > 0):
            raise ValueError("horizon, n_substeps and max_travel must be positive")

    @property
    def step(self) -> float:
        return self.horizon / self.n_substeps


def select_objective(objective: Objective, targets, pose: Pose) -> ObjectiveTarget:
    """Pick the worst-localized target, or build the centroid pseudo-target.

    ``targets`` is a sequence of ``(prior_cov, predicted_position)`` pairs.
    Supremum ties go to the lowest index.
    """
    targets = list(targets)
    if not targets:
        raise EmptyTargetSet("no targets to plan for")
    covs = np.array([np.asarray(c, dtype=float) for c, _ in targets])
    positions = np.array([np.asarray(x, dtype=float) for _, x in targets])
    if Objective(objective) is Objective.SUPREMUM:
        traces = np.trace(covs, axis1=1, axis2=2)
        idx = int(np.argmax(traces))
        cov, pos = covs[idx], positions[idx]
    else:
        idx = None
        cov, pos = covs.mean(axis=0), positions.mean(axis=0)
    return ObjectiveTarget(cov, pos, pose.relative(pos), idx)


def _fusion_terms(p, prior, rig, rotation, noise):
    """Return (h, M, J, pixels) with M = prior (prior + Sigma)^-1 = Xi Sigma^-1."""
    p = np.asarray(p, dtype=float)
    px = project(rig, p)
    jac = jacobian(rig, px)
    a = rotation @ jac
    sigma = a @ noise @ a.T
    total = prior + sigma
    total = (total + total.T) / 2
    c = np.linalg.cond(total)
    if not np.isfinite(c) or c > _COND_LIMIT:
        raise SingularCovariance(f"prior + sigma is singular (cond {c:.3g})")
    m = np.linalg.solve(total, prior).T  # total, prior symmetric
    xi = m @ sigma
    return float(np.trace(xi)), m, jac, px


def potential_at(p, prior, rig: CameraRig, rotation, noise) -> float:
    """Uncertainty potential at an arbitrary relative position ``p``."""
    return _fusion_terms(p, np.asarray(prior, float), rig, np.asarray(rotation, float),
                         np.asarray(noise, float))[0]


def gradient_at(p, prior, rig: CameraRig, rotation, noise) -> np.ndarray:
    """Closed-form gradient of :func:`potential_at` with respect to ``p``.

    dh/dp_j = tr(Sigma^-1 Xi^2 Sigma^-1 dSigma/dp_j), with Sigma^-1 Xi^2
    Sigma^-1 = M^T M and dSigma/dp_j = R (dJ_j Q J^T + J Q dJ_j^T) R^T.
    """
    p = np.asarray(p, dtype=float)
    rotation = np.asarray(rotation, float)
    noise = np.asarray(noise, float)
    _, m, jac, px = _fusion_terms(p, np.asarray(prior, float), rig, rotation, noise)
    g = rotation.T @ (m.T @ m) @ rotation
    x_l, x_r, y = px
    s = rig.focal / p[2]
    # d(x_L, x_R, y)/dp, rows = pixel coordinate, cols = p component
    dpx_dp = np.array([
        [s, 0.0, -x_l / p[2]],
        [s, 0.0, -x_r / p[2]],
        [0.0, s, -y / p[2]],
    ])
    dj_du = jacobian_pixel_derivatives(rig, px)
    qjt = noise @ jac.T
    grad = np.empty(3)
    for j in range(3):
        dj = dj_du[0] * dpx_dp[0, j] + dj_du[1] * dpx_dp[1, j] + dj_du[2] * dpx_dp[2, j]
        # tr(G (B + B^T)) = 2 tr(G B) for symmetric G
        grad[j] = 2.0 * np.sum(g * (dj @ qjt))
    return grad


def uncertainty_potential(obj: ObjectiveTarget, rig: CameraRig, rotation, noise) -> float:
    return potential_at(obj.relative_position, obj.prior_cov, rig, rotation, noise)


def grad_h(obj: ObjectiveTarget, rig: CameraRig, rotation, noise) -> np.ndarray:
    return gradient_at(obj.relative_position, obj.prior_cov, rig, rotation, noise)


def _valid(rig: CameraRig, p) -> bool:
    if p[2] <= 0:
        return False
    return p[2] * rig.width > rig.baseline * rig.focal


def _clip_to_ball(p0, start, end, radius):
    """Point where segment start->end leaves the ball |x - p0| <= radius."""
    d = end - start
    a0 = start - p0
    qa = d @ d
    qb = 2 * (a0 @ d)
    qc = a0 @ a0 - radius**2
    disc = max(qb * qb - 4 * qa * qc, 0.0)
    t = (-qb + np.sqrt(disc)) / (2 * qa)
    return start + min(max(t, 0.0), 1.0) * d


def next_best_view(obj: ObjectiveTarget, cfg: NbvConfig, rig: CameraRig, rotation, noise,
                   frozen_axis=None) -> np.ndarray:
    """Integrate p' = -K grad h(p) by forward Euler until the horizon is used
    up or the point has moved ``cfg.max_travel`` from where it started.

    The Euler step is ``cfg.step`` but never longer than one ``n_substeps``-th
    of the travel limit, so the clamp is reached along the gradient path
    rather than in one jump.  A substep that would increase ``h`` or leave
    the region in front of both cameras is halved until it does not.
    ``frozen_axis`` (a camera-frame unit vector) removes motion along that
    axis, used for planar scenarios.
    """
    rotation = np.asarray(rotation, float)
    noise = np.asarray(noise, float)
    prior = np.asarray(obj.prior_cov, float)
    p0 = np.asarray(obj.relative_position, dtype=float).copy()
    if not _valid(rig, p0):
        raise NonPositiveDepth(f"objective target depth {p0[2]!r} is not in front of the rig")
    axis = None if frozen_axis is None else np.asarray(frozen_axis, float)

    p = p0.copy()
    h = potential_at(p, prior, rig, rotation, noise)
    t = 0.0
    max_len = cfg.max_travel / cfg.n_substeps
    for _ in range(4 * cfg.n_substeps):
        if t >= cfg.horizon * (1 - 1e-12):
            break
        direction = -cfg.gain * gradient_at(p, prior, rig, rotation, noise)
        if axis is not None:
            direction -= (direction @ axis) * axis
        speed = np.linalg.norm(direction)
        if speed == 0:
            break
        ds = min(cfg.step, max_len / speed, cfg.horizon - t)
        for _ in range(cfg.max_backtracks):
            cand = p + ds * direction
            hit_limit = np.linalg.norm(cand - p0) >= cfg.max_travel
            if hit_limit:
                cand = _clip_to_ball(p0, p, cand, cfg.max_travel)
            if _valid(rig, cand):
                try:
                    h_cand = potential_at(cand, prior, rig, rotation, noise)
                except (NonPositiveDisparity, SingularCovariance):
                    h_cand = np.inf
                if h_cand <= h:
                    break
            ds /= 2
        else:
            return p
        p, h = cand, h_cand
        t += ds
        if hit_limit:
            break
    return p
