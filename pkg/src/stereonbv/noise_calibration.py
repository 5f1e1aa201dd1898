"""Pixel-level bias correction and empirical pixel-noise covariance.

Raw pixel triples are mapped to corrected ones by a linear model on six
features, fitted by ordinary least squares against ground-truth pixels
(projections of known target positions).  The residual covariance of the fit
is the pixel noise covariance Q used for triangulation uncertainty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RankDeficient, ZeroDisparity
from .stereo_model import CameraRig, project, quantize

SCHEMA_VERSION = 1
N_FEATURES = 6
COND_LIMIT = 1e12

#: Residual pixel covariance of a reference lab rig after bias correction.
REFERENCE_Q = np.array([
    [0.1297, 0.1267, -0.0882],
    [0.1267, 0.1355, -0.0819],
    [-0.0882, -0.0819, 0.6988],
])


def features(px) -> np.ndarray:
    """[1, y, d, x_L + x_R, y d, (x_L + x_R) / d] with d = x_L - x_R.

    Accepts a single triple or an (n, 3) array; returns shape (6,) or (n, 6).
    """
    px = np.asarray(px, dtype=float)
    single = px.ndim == 1
    px = np.atleast_2d(px)
    x_l, x_r, y = px[:, 0], px[:, 1], px[:, 2]
    d = x_l - x_r
    if np.any(d == 0):
        raise ZeroDisparity("features need x_L != x_R")
    s = x_l + x_r
    out = np.column_stack([np.ones_like(d), y, d, s, y * d, s / d])
    return out[0] if single else out


@dataclass
class RegressionModel:
    """Coefficients ``beta`` (6x3) mapping features to corrected pixels, and
    the residual pixel covariance ``q``."""

    beta: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).reshape(N_FEATURES, 3)
        self.q = np.asarray(self.q, dtype=float).reshape(3, 3)
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.q))):
            raise ValueError("model coefficients must be finite")

    @classmethod
    def identity(cls) -> RegressionModel:
        """Model whose correction returns its input unchanged."""
        beta = np.zeros((N_FEATURES, 3))
        # x_L = (s + d)/2, x_R = (s - d)/2, y = y
        beta[2] = [0.5, -0.5, 0.0]
        beta[3] = [0.5, 0.5, 0.0]
        beta[1] = [0.0, 0.0, 1.0]
        return cls(beta)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "order": "row-major",
            "beta_shape": [N_FEATURES, 3],
            "beta": [float(v) for v in self.beta.ravel()],
            "q_shape": [3, 3],
            "q": [float(v) for v in self.q.ravel()],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> RegressionModel:
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema_version {doc.get('schema_version')!r}")
        if doc.get("order", "row-major") != "row-major":
            raise ValueError("only row-major ordering is supported")
        beta = np.array(doc["beta"], dtype=float).reshape(doc.get("beta_shape", [N_FEATURES, 3]))
        q = np.array(doc["q"], dtype=float).reshape(doc.get("q_shape", [3, 3]))
        return cls(beta, q)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> RegressionModel:
        return cls.from_json(Path(path).read_text())


@dataclass
class TrainingSet:
    """Feature matrix ``x`` (n x 6) of raw pixels, ground-truth pixels ``y`` (n x 3).

    ``raw`` keeps the raw pixel triples for uncorrected-error diagnostics.
    """

    x: np.ndarray
    y: np.ndarray
    raw: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2 or self.x.shape[1] != N_FEATURES:
            raise ValueError(f"x must be (n, {N_FEATURES})")
        if self.y.shape != (len(self.x), 3):
            raise ValueError("y must be (n, 3) with the same n as x")
        if len(self.x) <= N_FEATURES:
            raise ValueError(f"need more than {N_FEATURES} samples")

    @classmethod
    def from_pixels(cls, raw, truth) -> TrainingSet:
        raw = np.asarray(raw, dtype=float)
        return cls(features(raw), truth, raw)


def fit(train: TrainingSet) -> tuple[RegressionModel, np.ndarray]:
    """OLS fit of ground truth on features; returns the model and residual covariance.

    The residual covariance uses the n - 6 degrees-of-freedom normalization.
    """
    x, y = train.x, train.y
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 > COND_LIMIT:
        raise RankDeficient("feature matrix is (numerically) rank deficient")
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    q_hat = resid.T @ resid / (len(x) - N_FEATURES)
    q_hat = (q_hat + q_hat.T) / 2
    return RegressionModel(beta, q_hat), q_hat


def correct(px, model: RegressionModel) -> np.ndarray:
    """Corrected pixel triple(s) features(px) @ beta."""
    return features(px) @ model.beta


def residual_covariance(truth, observed) -> np.ndarray:
    """Sample covariance (n - 1) of truth - observed, e.g. for uncorrected pixels."""
    e = np.asarray(truth, float) - np.asarray(observed, float)
    return np.atleast_2d(np.cov(e, rowvar=False))


@dataclass
class BiasModel:
    """Systematic pixel error added to synthetic observations.

    bias = offset + disparity_gain * d + position_gain * (x_L + x_R) / 2,
    each a per-coordinate 3-vector over (x_L, x_R, y).
    """

    offset: np.ndarray = field(default_factory=lambda: np.array([0.4, 0.0, 0.0]))
    disparity_gain: np.ndarray = field(default_factory=lambda: np.zeros(3))
    position_gain: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float).reshape(3)
        self.disparity_gain = np.asarray(self.disparity_gain, dtype=float).reshape(3)
        self.position_gain = np.asarray(self.position_gain, dtype=float).reshape(3)

    def __call__(self, px: np.ndarray) -> np.ndarray:
        d = (px[:, 0] - px[:, 1])[:, None]
        m = ((px[:, 0] + px[:, 1]) / 2)[:, None]
        return self.offset + d * self.disparity_gain + m * self.position_gain


def synth_training_set(rig: CameraRig, bias_model: BiasModel | None, noise, n: int = 600,
                       seed: int = 0, *, quantized: bool = True,
                       depth_range: tuple[float, float] | None = None,
                       fov_fraction: float = 0.8) -> TrainingSet:
    """Simulated calibration data from projections of random visible points.

    Points are drawn uniformly in depth over ``depth_range`` (default 2 to 20
    minimum stereo depths) and laterally within ``fov_fraction`` of the shared
    field of view.  Observed pixels are truth + bias + Gaussian(noise), then
    optionally quantized.
    """
    if n <= N_FEATURES:
        raise ValueError(f"need n > {N_FEATURES}")
    rng = np.random.default_rng(seed)
    lo, hi = depth_range if depth_range is not None else (2 * rig.min_depth, 20 * rig.min_depth)
    z = rng.uniform(lo, hi, n)
    b, f, w = rig.baseline, rig.focal, rig.width
    x_lim = (w * z - b * f) / (2 * f) * fov_fraction
    y_lim = z * rig.height / (2 * f) * fov_fraction
    pts = np.column_stack([rng.uniform(-1, 1, n) * x_lim, rng.uniform(-1, 1, n) * y_lim, z])
    truth = np.array([project(rig, p) for p in pts])
    observed = truth.copy()
    if bias_model is not None:
        observed += bias_model(truth)
    noise = np.asarray(noise, dtype=float)
    if np.any(noise):
        observed += rng.multivariate_normal(np.zeros(3), noise, size=n)
    if quantized:
        observed = quantize(observed)
    # zero disparity would make the features undefined
    bad = observed[:, 0] - observed[:, 1] == 0
    observed[bad, 0] += 1.0
    return TrainingSet.from_pixels(observed, truth)
