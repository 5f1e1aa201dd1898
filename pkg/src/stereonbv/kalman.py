"""Kalman filtering of 9-dimensional target states [position; velocity; acceleration].

All functions are pure; :class:`TargetFilter` is a thin stateful wrapper used
by the simulator, one instance per target.
"""

from __future__ import annotations

import numpy as np

from .errors import NonPositiveDt, SingularInnovation, SingularInput

COND_LIMIT = 1e12
I3 = np.eye(3)

#: Maps the 9-dim state to its position block, H = [1 0 0] (x) I_3.
OBSERVATION_MATRIX = np.kron(np.array([[1.0, 0.0, 0.0]]), I3)


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt!r}")


def phi_static() -> np.ndarray:
    """Zero-velocity transition: keeps position, zeroes velocity and acceleration."""
    return np.kron(np.diag([1.0, 0.0, 0.0]), I3)


def phi_const_accel(dt: float) -> np.ndarray:
    _check_dt(dt)
    block = np.array([[1.0, dt, dt**2 / 2], [0.0, 1.0, dt], [0.0, 0.0, 1.0]])
    return np.kron(block, I3)


def process_noise(dt: float, intensity: float = 1.0) -> np.ndarray:
    """Singer-style process noise W for a white-jerk model, scaled by ``intensity``."""
    _check_dt(dt)
    block = np.array([
        [dt**5 / 20, dt**4 / 8, dt**3 / 6],
        [dt**4 / 8, dt**3 / 3, dt**2 / 2],
        [dt**3 / 6, dt**2 / 2, dt],
    ])
    return intensity * np.kron(block, I3)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def kf_predict(state, cov, phi, w) -> tuple[np.ndarray, np.ndarray]:
    phi = np.asarray(phi, dtype=float)
    z = phi @ np.asarray(state, dtype=float)
    u = phi @ np.asarray(cov, dtype=float) @ phi.T + np.asarray(w, dtype=float)
    return z, _symmetrize(u)


def kf_update(pred_state, pred_cov, meas, sigma) -> tuple[np.ndarray, np.ndarray]:
    """Fuse a global position measurement with covariance ``sigma``."""
    z = np.asarray(pred_state, dtype=float)
    u = np.asarray(pred_cov, dtype=float)
    h = OBSERVATION_MATRIX
    hu = h @ u
    s = _symmetrize(hu @ h.T + np.asarray(sigma, dtype=float))
    if np.linalg.cond(s) > COND_LIMIT:
        raise SingularInnovation(f"innovation condition number {np.linalg.cond(s):.3g}")
    # K = U H^T S^-1; S and U symmetric so K^T = S^-1 H U
    gain = np.linalg.solve(s, hu).T
    z_new = z + gain @ (np.asarray(meas, dtype=float) - h @ z)
    u_new = _symmetrize(u - gain @ hu)
    return z_new, u_new


def fused_position_covariance(prior, sigma) -> np.ndarray:
    """Posterior position covariance [prior^-1 + sigma^-1]^-1.

    Evaluated as prior (prior + sigma)^-1 sigma, which avoids inverting either
    factor on its own.
    """
    prior = np.asarray(prior, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    total = prior + sigma
    for name, m in (("prior", prior), ("sigma", sigma), ("prior + sigma", total)):
        c = np.linalg.cond(m)
        if not np.isfinite(c) or c > COND_LIMIT:
            raise SingularInput(f"{name} is singular (cond {c:.3g})")
    xi = prior @ np.linalg.solve(total, sigma)
    return _symmetrize(xi)


class TargetFilter:
    """Per-target KF state.

    The first observation initializes the position block; velocity and
    acceleration start at zero with variance ``init_var`` per axis.
    """

    def __init__(self, init_var: float = 1e4):
        self.init_var = init_var
        self.state: np.ndarray | None = None
        self.cov: np.ndarray | None = None

    @property
    def initialized(self) -> bool:
        return self.state is not None

    @property
    def position(self) -> np.ndarray:
        return OBSERVATION_MATRIX @ self.state

    @property
    def position_cov(self) -> np.ndarray:
        h = OBSERVATION_MATRIX
        return h @ self.cov @ h.T

    def initialize(self, meas, sigma) -> None:
        self.state = np.zeros(9)
        self.state[:3] = meas
        self.cov = np.zeros((9, 9))
        self.cov[:3, :3] = _symmetrize(np.asarray(sigma, dtype=float))
        self.cov[3:, 3:] = self.init_var * np.eye(6)

    def predicted(self, phi, w) -> tuple[np.ndarray, np.ndarray]:
        return kf_predict(self.state, self.cov, phi, w)

    def step(self, meas, sigma, phi, w) -> None:
        """Predict with (phi, w) then update, or initialize on the first call."""
        if not self.initialized:
            self.initialize(meas, sigma)
            return
        z, u = self.predicted(phi, w)
        self.state, self.cov = kf_update(z, u, meas, sigma)
