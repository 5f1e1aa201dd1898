"""Learning a pixel correction from matched observations.

Synthetic observations of a small rig carry a constant 0.4 px offset on the
left image plus correlated noise.  A linear model in the features
(1, y, d, x_L + x_R, y d, (x_L + x_R) / d) is fitted by least squares.
Its residual covariance replaces the identity as the pixel noise Q fed to
the planner.
"""
from __future__ import annotations

import numpy as np

from stereonbv.noise_calibration import BiasModel, correct, fit, residual_covariance, synth_training_set
from stereonbv.stereo_model import CameraRig, triangulate

np.set_printoptions(precision=4, suppress=True)


def main() -> None:
    rig = CameraRig.from_fov(0.04, 54, 43, 70.0)
    noise = np.array([[0.10, 0.08, -0.03], [0.08, 0.10, -0.03], [-0.03, -0.03, 0.30]])
    train = synth_training_set(rig, BiasModel(), noise, n=2000, seed=0)
    model, q_hat = fit(train)

    test = synth_training_set(rig, BiasModel(), noise, n=2000, seed=1)
    print("mean pixel error before correction:", (test.raw - test.y).mean(axis=0))
    print("mean pixel error after correction: ", (correct(test.raw, model) - test.y).mean(axis=0))
    print("\nuncorrected covariance\n", residual_covariance(test.y, test.raw))
    print("fitted Q (includes 1/12 px^2 of rounding noise per coordinate)\n", q_hat)

    # what the offset does to triangulated points
    corrected = correct(test.raw, model)
    keep = (test.raw[:, 0] > test.raw[:, 1]) & (corrected[:, 0] > corrected[:, 1])
    truth = np.array([triangulate(rig, px) for px in test.y[keep]])
    raw = np.array([triangulate(rig, px) for px in test.raw[keep]])
    fixed = np.array([triangulate(rig, px) for px in corrected[keep]])
    print("\nmean triangulation offset (m), raw pixels:      ", (raw - truth).mean(axis=0))
    print("mean triangulation offset (m), corrected pixels:", (fixed - truth).mean(axis=0))


if __name__ == "__main__":
    main()
