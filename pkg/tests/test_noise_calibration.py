from __future__ import annotations

import numpy as np
import pytest

from stereonbv.errors import RankDeficient, ZeroDisparity
from stereonbv.noise_calibration import (REFERENCE_Q, BiasModel, RegressionModel, TrainingSet,
                                         correct, features, fit, residual_covariance,
                                         synth_training_set)
from stereonbv.stereo_model import CameraRig, measurement_covariance, triangulate

from conftest import random_spd

LAB_RIG = CameraRig.from_fov(0.04, 54, 43, 70.0)
C = np.array([[0.30, 0.10, -0.05], [0.10, 0.25, 0.02], [-0.05, 0.02, 0.40]])


def random_pixels(rng, n):
    xl = rng.uniform(-20, 20, n)
    return np.column_stack([xl, xl - rng.uniform(0.5, 10, n), rng.uniform(-20, 20, n)])


class TestFeatures:
    def test_examples(self):
        np.testing.assert_array_equal(features([2, 1, 0]), [1, 0, 1, 3, 0, 3])
        np.testing.assert_array_equal(features([1, -1, 1]), [1, 1, 2, 0, 2, 0])

    def test_zero_disparity(self):
        with pytest.raises(ZeroDisparity):
            features([1, 1, 0])

    def test_batch_matches_single(self, rng):
        px = random_pixels(rng, 20)
        np.testing.assert_allclose(features(px), np.array([features(p) for p in px]))


class TestFit:
    def test_noiseless_recovery(self, rng):
        beta = rng.normal(size=(6, 3))
        x = features(random_pixels(rng, 200))
        model, q_hat = fit(TrainingSet(x, x @ beta))
        np.testing.assert_allclose(model.beta, beta, atol=1e-9)
        assert np.abs(q_hat).max() < 1e-12

    def test_noise_covariance_consistency(self, rng):
        beta = rng.normal(size=(6, 3))
        x = features(random_pixels(rng, 10_000))
        y = x @ beta + rng.multivariate_normal(np.zeros(3), C, size=10_000)
        _, q_hat = fit(TrainingSet(x, y))
        assert np.abs(q_hat - C).max() <= 0.1 * np.trace(C)

    def test_normal_equations_and_residual_means(self, rng):
        x = features(random_pixels(rng, 500))
        y = rng.normal(size=(500, 3)) * 3
        model, q_hat = fit(TrainingSet(x, y))
        resid = y - x @ model.beta
        assert np.abs(x.T @ resid).max() <= 1e-8 * np.linalg.norm(x) * np.linalg.norm(y)
        np.testing.assert_allclose(resid.mean(axis=0), 0, atol=1e-9)
        np.testing.assert_allclose(q_hat, resid.T @ resid / (500 - 6))
        assert np.linalg.eigvalsh(q_hat).min() >= 0

    def test_rank_deficient(self, rng):
        x = features(random_pixels(rng, 50))
        x[:, 4] = x[:, 1]
        with pytest.raises(RankDeficient):
            fit(TrainingSet(x, rng.normal(size=(50, 3))))

    def test_training_set_shape_checks(self, rng):
        with pytest.raises(ValueError):
            TrainingSet(np.ones((6, 6)), np.ones((6, 3)))
        with pytest.raises(ValueError):
            TrainingSet(np.ones((10, 5)), np.ones((10, 3)))


class TestCorrect:
    def test_identity_model(self, rng):
        px = random_pixels(rng, 50)
        np.testing.assert_allclose(correct(px, RegressionModel.identity()), px, atol=1e-12)

    def test_bias_removal(self):
        train = synth_training_set(LAB_RIG, BiasModel(offset=[0.4, 0, 0]), np.diag([0.1, 0.1, 0.1]),
                                   n=600, seed=1, quantized=False)
        model, _ = fit(train)
        test = synth_training_set(LAB_RIG, BiasModel(offset=[0.4, 0, 0]), np.diag([0.1, 0.1, 0.1]),
                                  n=2000, seed=2, quantized=False)
        raw_mean = (test.raw - test.y).mean(axis=0)
        assert raw_mean[0] == pytest.approx(0.4, abs=0.05)
        corrected = correct(test.raw, model)
        assert np.abs((corrected - test.y).mean(axis=0)).max() < 0.05

    def test_corrected_beats_uncorrected(self):
        bias = BiasModel(offset=[0.4, -0.1, 0.2], disparity_gain=[0.02, 0.0, 0.01])
        train = synth_training_set(LAB_RIG, bias, 0.05 * np.eye(3), n=600, seed=4)
        _, q_hat = fit(train)
        raw_cov = residual_covariance(train.y, train.raw)
        raw_mse = np.mean(np.sum((train.y - train.raw) ** 2, axis=1))
        assert np.trace(q_hat) < np.trace(raw_cov) <= raw_mse

    def test_downstream_covariance_spd(self):
        train = synth_training_set(LAB_RIG, BiasModel(), 0.1 * np.eye(3), n=600, seed=5)
        model, q_hat = fit(train)
        for px in correct(train.raw[:50], model):
            if px[0] - px[1] > 0.5:
                s = measurement_covariance(LAB_RIG, px, np.eye(3), q_hat)
                assert np.linalg.eigvalsh(s).min() > 0
                assert triangulate(LAB_RIG, px)[2] > 0


class TestSynth:
    def test_clean_data_is_exact(self):
        train = synth_training_set(LAB_RIG, None, np.zeros((3, 3)), n=100, seed=0, quantized=False)
        np.testing.assert_allclose(train.raw, train.y)
        np.testing.assert_allclose(correct(train.raw, RegressionModel.identity()), train.y, atol=1e-12)

    def test_deterministic(self):
        a = synth_training_set(LAB_RIG, BiasModel(), 0.1 * np.eye(3), seed=3)
        b = synth_training_set(LAB_RIG, BiasModel(), 0.1 * np.eye(3), seed=3)
        assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
        assert len(a.x) == 600

    def test_quantized_observations_are_integers(self):
        t = synth_training_set(LAB_RIG, BiasModel(), 0.1 * np.eye(3), n=50, seed=0)
        np.testing.assert_array_equal(t.raw, np.round(t.raw))


class TestModelFile:
    def test_round_trip(self, rng, tmp_path):
        model = RegressionModel(rng.normal(size=(6, 3)), random_spd(rng))
        path = tmp_path / "model.json"
        model.save(path)
        back = RegressionModel.load(path)
        np.testing.assert_array_equal(back.beta, model.beta)
        np.testing.assert_array_equal(back.q, model.q)

    def test_row_major_layout(self):
        import json
        beta = np.arange(18.0).reshape(6, 3)
        doc = json.loads(RegressionModel(beta).to_json())
        assert doc["schema_version"] == 1
        assert doc["beta"][:4] == [0.0, 1.0, 2.0, 3.0]

    def test_rejects_unknown_version(self):
        text = RegressionModel.identity().to_json().replace('"schema_version": 1', '"schema_version": 9')
        with pytest.raises(ValueError):
            RegressionModel.from_json(text)

    def test_reference_q_is_spd(self):
        np.testing.assert_array_equal(REFERENCE_Q, REFERENCE_Q.T)
        assert np.linalg.eigvalsh(REFERENCE_Q).min() > 0
