from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from stereonbv.stereo_model import CameraRig

# lines reported by the acceptance suite, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_spd(rng: np.random.Generator, n: int = 3, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n))
    return scale * (a @ a.T + 0.5 * np.eye(n))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=rng.integers(2**32)).as_matrix()


def random_visible_point(rig: CameraRig, rng: np.random.Generator, zmax_factor: float = 30.0,
                         fraction: float = 0.8) -> np.ndarray:
    z = rng.uniform(2 * rig.min_depth, zmax_factor * rig.min_depth)
    b, f, w = rig.baseline, rig.focal, rig.width
    x_lim = (w * z - b * f) / (2 * f) * fraction
    y_lim = z * w / (2 * f) * fraction
    return np.array([rng.uniform(-x_lim, x_lim), rng.uniform(-y_lim, y_lim), z])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_rig():
    """b = 1, f = 100, 200-pixel square image."""
    return CameraRig.from_focal(1.0, 100.0, 200.0)


@pytest.fixture
def sim_rig():
    """b = 1, 1024-pixel square image, 70 degree field of view."""
    return CameraRig.from_fov(1.0, 1024, 1024, 70.0)
