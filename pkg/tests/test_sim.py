from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest

from stereonbv.cli import main
from stereonbv.errors import InitialPoseOutOfFov
from stereonbv.geometry import Pose
from stereonbv.pose_controller import barriers, fov_contains
from stereonbv.sim.batch import batch_run, compare, compare_grid, pearson
from stereonbv.sim.controllers import (Grid, Prediction, StraightLatch, circle_baseline_step,
                                       grid_candidates, grid_heuristic_step, grid_offsets,
                                       straight_baseline_step)
from stereonbv.sim.scenario import (Controller, Scenario, lab_scenario,
                                    mobile_scenario, static_scenario)
from stereonbv.sim.targets import MobileTrajectory, RingLayout, olympic_targets
from stereonbv.sim.trial import CSV_HEADER, run_trial
from stereonbv.nbv_planner import potential_at
from stereonbv.stereo_model import CameraRig

from scipy.spatial.transform import Rotation


def quick_static(controller=Controller.CIRCLE_BASELINE, **kw):
    kw.setdefault("n_observations", 6)
    return static_scenario(controller, **kw)


# ------------------------------------------------------------------ targets

class TestTargets:
    def test_positions_at_phase(self):
        tr = MobileTrajectory((1.0, 2.0, 0.0), 2.0, 0.7, phase=math.pi / 2)
        u, v = tr.basis()
        np.testing.assert_allclose(tr.position(0.0), np.array([1, 2, 0]) + 2 * v, atol=1e-15)

    def test_periodic(self):
        trajs = RingLayout().trajectories(5, np.linspace(0, 3, 5))
        period = 2 * math.pi / 1.0
        np.testing.assert_allclose(olympic_targets(period, trajs), olympic_targets(0.0, trajs),
                                   atol=1e-12)

    def test_ring_geometry(self):
        lay = RingLayout(radius=1.0, spacing=2.2)
        c = lay.ring_centers()
        assert c.shape == (5, 3)
        top, bottom = c[:3], c[3:]
        np.testing.assert_allclose(np.diff(top[:, 0]), 2.2)
        np.testing.assert_allclose(bottom[:, 0], [-1.1, 1.1])
        assert np.all(top[:, 1] > bottom[:, 1].max())
        # neighbouring rings overlap, like the emblem
        assert np.linalg.norm(top[0] - bottom[0]) < 2 * lay.radius

    def test_alternating_direction(self):
        trajs = RingLayout(rate=0.5).trajectories(5, np.zeros(5))
        assert [t.rate for t in trajs] == [0.5, -0.5, 0.5, -0.5, 0.5]

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            MobileTrajectory((0, 0, 0), 0.0, 1.0)


# ------------------------------------------------------------------ scenario files

class TestScenario:
    @pytest.mark.parametrize("make", [static_scenario, mobile_scenario, lab_scenario])
    def test_json_round_trip(self, make, tmp_path):
        sc = make(seed=17)
        path = tmp_path / "s.json"
        sc.save(path)
        back = Scenario.load(path)
        assert back.to_json() == sc.to_json()

    def test_unknown_key(self):
        doc = static_scenario().to_dict()
        doc["warp_factor"] = 9
        with pytest.raises(ValueError, match="unknown"):
            Scenario.from_dict(doc)

    def test_schema_version_required(self):
        doc = static_scenario().to_dict()
        doc["schema_version"] = 2
        with pytest.raises(ValueError):
            Scenario.from_dict(doc)

    def test_rig_from_fov(self):
        doc = static_scenario().to_dict()
        doc["rig"] = {"baseline": 1.0, "width": 640, "fov_deg": 60.0}
        sc = Scenario.from_dict(doc)
        assert sc.rig.focal == pytest.approx(320 / math.tan(math.radians(30)))

    def test_validation(self):
        with pytest.raises(ValueError):
            static_scenario(n_observations=0)
        with pytest.raises(ValueError):
            static_scenario(pixel_noise=np.zeros((3, 3)))


# ------------------------------------------------------------------ baselines

def _pred(points, cov=None):
    points = np.asarray(points, float)
    covs = np.array([np.eye(3) if cov is None else cov for _ in points])
    return Prediction(points, covs)


class TestStraight:
    def test_far_moves_full_budget(self, sim_rig):
        pose = Pose.looking_at([-50.0, 0, 0], [0, 0, 0])
        latch = StraightLatch()
        new = straight_baseline_step(pose, _pred([[0, 0, 0], [0.3, 0.2, 0.1]]), 2.0, sim_rig, latch)
        step = new.r - pose.r
        assert np.linalg.norm(step) == pytest.approx(2.0)
        centroid = np.array([0.15, 0.1, 0.05])
        assert step / 2.0 @ ((centroid - pose.r) / np.linalg.norm(centroid - pose.r)) == pytest.approx(1.0)

    def test_latch(self, sim_rig):
        pose = Pose.looking_at([-5.0, 0, 0], [0, 0, 0])
        pred = _pred([[0, 0.3, 0], [0, -0.3, 0]])
        latch = StraightLatch(halt_fraction=0.05)
        for _ in range(50):
            pose = straight_baseline_step(pose, pred, 0.5, sim_rig, latch)
        assert latch.halted
        frozen = pose.copy()
        for _ in range(3):
            pose = straight_baseline_step(pose, pred, 0.5, sim_rig, latch)
            np.testing.assert_array_equal(pose.r, frozen.r)
        assert np.all(barriers(sim_rig, pose, pred.positions) >= latch.thresholds)


class TestCircle:
    def test_closed_orbit(self):
        c = np.array([1.0, -2.0, 0.5])
        pose = Pose.looking_at(c + [-7.0, 0, 0], c)
        budget = 2 * math.pi * 7 / 4
        for _ in range(4):
            pose = circle_baseline_step(pose, c, budget)
        np.testing.assert_allclose(pose.r, c + [-7.0, 0, 0], atol=1e-9)

    def test_constant_range_and_span(self):
        c = np.zeros(3)
        pose = Pose.looking_at([-10.0, 0, 2.0], c)
        start = pose.r.copy()
        radius = 10.0
        for k in range(1, 8):
            pose = circle_baseline_step(pose, c, 1.3)
            assert np.linalg.norm(pose.r - c) == pytest.approx(np.linalg.norm(start - c), abs=1e-9)
            a0 = math.atan2(start[1], start[0])
            a1 = math.atan2(pose.r[1], pose.r[0])
            span = (a1 - a0) % (2 * math.pi)
            assert span == pytest.approx(k * 1.3 / radius, abs=1e-9)
            # facing the centre
            np.testing.assert_allclose(pose.rot[:, 2], -pose.r / np.linalg.norm(pose.r), atol=1e-9)


class TestGrid:
    def test_neighbourhoods(self):
        sq = grid_offsets(Grid.SQUARE, 0.25)
        tri = grid_offsets(Grid.TRIANGULAR, 0.25)
        assert len(sq) == 9 and len(tri) == 7
        np.testing.assert_array_equal(sq[0], 0)
        np.testing.assert_array_equal(tri[0], 0)
        np.testing.assert_allclose(np.linalg.norm(tri[1:], axis=1), 0.25)
        assert sorted(np.round(np.linalg.norm(sq[1:], axis=1), 6)) == [0.25] * 4 + [0.353553] * 4

    def test_candidates_in_plane(self):
        pose = Pose.looking_at([-1.0, 0.0, 0.3], [0, 0, 0.3])
        cands = grid_candidates(pose, Grid.SQUARE, 0.25)
        np.testing.assert_allclose(cands[:, 2], 0.3)

    def test_argmin_not_worse_than_staying(self):
        rig = CameraRig.from_fov(0.04, 54, 43, 70.0)
        pose = Pose.looking_at([-0.8, 0.1, 0.0], [0, 0, 0])
        pred = _pred([[0, 0, 0], [0.1, 0.1, 0.0]], cov=np.diag([1e-3, 2e-3, 1e-3]))
        for grid in Grid:
            new, val = grid_heuristic_step(pose, pred, grid, 0.25, rig, np.eye(3))
            s = pred.worst
            here = potential_at(pose.relative(pred.positions[s]), pred.covs[s], rig,
                                Pose.looking_at(pose.r, pred.positions[s]).rot, np.eye(3))
            assert val <= here + 1e-15
            np.testing.assert_allclose(new.rot[:, 2], (pred.positions[s] - new.r) / np.linalg.norm(pred.positions[s] - new.r))

    def test_stays_when_moves_are_forbidden(self):
        rig = CameraRig.from_fov(0.04, 54, 43, 70.0)
        pose = Pose.looking_at([-0.8, 0.1, 0.0], [0, 0, 0])
        pred = _pred([[0, 0, 0]], cov=1e-3 * np.eye(3))
        new, _ = grid_heuristic_step(pose, pred, Grid.SQUARE, 0.25, rig, np.eye(3), max_move=0.1)
        np.testing.assert_array_equal(new.r, pose.r)


# ------------------------------------------------------------------ trials

def csv_rows(text):
    return list(csv.reader(io.StringIO(text)))


class TestTrial:
    def test_exact_observations(self):
        sc = quick_static(quantize=False, n_observations=3)
        res = run_trial(sc)
        assert res.aborted is None
        assert np.abs(res.errors).max() < 1e-9

    def test_row_count_and_header(self):
        sc = quick_static()
        res = run_trial(sc)
        rows = csv_rows(res.to_csv())
        assert rows[0] == CSV_HEADER
        assert len(rows) - 1 == sc.n_observations * sc.n_targets
        q = np.array([[float(v) for v in r[10:14]] for r in rows[1:]])
        np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0)
        assert np.all(q[:, 0] >= 0)

    def test_quaternion_matches_pose(self):
        res = run_trial(quick_static(n_observations=3))
        row = res.rows[-1]
        rot = Rotation.from_quat([*row.quat[1:], row.quat[0]]).as_matrix()
        np.testing.assert_allclose(rot[:, 2] @ (np.zeros(3) - row.r) / np.linalg.norm(row.r), 1.0,
                                   atol=0.05)

    @pytest.mark.parametrize("controller", list(Controller))
    def test_deterministic(self, controller):
        make = lab_scenario if controller.is_grid else quick_static
        sc = make(controller, n_observations=4, seed=11)
        assert run_trial(sc).to_csv() == run_trial(sc).to_csv()

    def test_seed_changes_layout(self):
        a = run_trial(quick_static(seed=1)).to_csv()
        b = run_trial(quick_static(seed=2)).to_csv()
        assert a != b

    def test_initial_pose_out_of_fov(self):
        sc = quick_static(initial_pose=Pose.looking_at([-50.0, 0, 0], [0, 80.0, 0]))
        with pytest.raises(InitialPoseOutOfFov):
            run_trial(sc)

    def test_numeric_failure_aborts_with_diagnostic_row(self):
        # a rig so coarse that the first observation has zero disparity
        sc = quick_static(rig=CameraRig.from_fov(1.0, 8, 8, 70.0))
        res = run_trial(sc)
        assert res.aborted is not None and "Disparity" in res.aborted
        assert res.rows[-1].target_id == -1

    def test_nbv_keeps_targets_visible_and_static_trace_monotone(self):
        sc = static_scenario(Controller.NBV_SUPREMUM, n_observations=10, seed=3,
                             process_noise_scale=0.0)
        res = run_trial(sc)
        assert res.aborted is None
        truth = np.array([r for r in res.rows if r.iter == 0])
        # every observation pose sees every target
        from stereonbv.sim.trial import initial_targets
        pts = initial_targets(sc, np.random.default_rng([sc.seed, 0]))(0.0)
        for k in range(sc.n_observations):
            row = next(r for r in res.rows if r.iter == k)
            rot = Rotation.from_quat([*row.quat[1:], row.quat[0]]).as_matrix()
            pose = Pose(row.r, rot)
            assert all(fov_contains(sc.rig, p) for p in pose.relative(pts))
        assert np.all(np.diff(res.traces, axis=0) <= 1e-9)
        assert len(truth) == sc.n_targets

    def test_mobile_runs(self):
        sc = mobile_scenario(Controller.NBV_CENTROID, n_observations=6, seed=2)
        res = run_trial(sc)
        assert res.aborted is None
        assert res.errors.shape == (6, 5)

    def test_budget_override(self):
        sc = quick_static(Controller.CIRCLE_BASELINE, n_observations=4)
        res = run_trial(sc, budgets=[0.5, 1.0, 1.5])
        np.testing.assert_allclose(res.displacements, [0.5, 1.0, 1.5], rtol=1e-2)


class TestBatch:
    def test_single_trial_aggregate(self):
        sc = quick_static(seed=5)
        batch = batch_run(sc, 1, base_seed=5)
        single = run_trial(sc)
        np.testing.assert_array_equal(batch.mean_error, single.errors.mean(axis=1))
        np.testing.assert_array_equal(batch.mean_trace, single.traces.mean(axis=1))

    def test_identical_seed_identical_aggregate(self):
        sc = quick_static()
        a, b = batch_run(sc, 3, 7), batch_run(sc, 3, 7)
        assert a.to_csv() == b.to_csv()
        np.testing.assert_array_equal(a.mean_error, b.mean_error)

    def test_seeds_are_consecutive(self):
        res = batch_run(quick_static(), 3, base_seed=40)
        assert [t.seed for t in res.trials] == [40, 41, 42]

    def test_pearson(self):
        assert pearson([1, 2, 3], [2, 4, 6.5]) == pytest.approx(np.corrcoef([1, 2, 3], [2, 4, 6.5])[0, 1])
        assert math.isnan(pearson([1, 1, 1], [1, 2, 3]))

    def test_compare_budget_parity(self):
        sc = static_scenario(n_observations=4)
        res = compare(sc, 1, 0)
        nbv = np.maximum(res[Controller.NBV_SUPREMUM].trials[0].displacements,
                         res[Controller.NBV_CENTROID].trials[0].displacements)
        circle = res[Controller.CIRCLE_BASELINE].trials[0].displacements
        straight = res[Controller.STRAIGHT_BASELINE].trials[0].displacements
        # chord vs arc on a radius-50 circle
        np.testing.assert_allclose(circle, nbv, rtol=1e-3)
        np.testing.assert_allclose(straight, nbv, rtol=1e-12)

    def test_compare_grid_path_budget(self):
        sc = lab_scenario(n_observations=4)
        res = compare_grid(sc, 2, 0)
        for i in range(2):
            limit = res[Controller.NBV_SUPREMUM].trials[i].path_length
            for c in (Controller.GRID_SQUARE, Controller.GRID_TRIANGULAR):
                assert res[c].trials[i].path_length <= limit + 1e-9


# ------------------------------------------------------------------ CLI

class TestCli:
    def test_preset_simulate(self, tmp_path, capsys):
        scen = tmp_path / "s.json"
        assert main(["preset", "static", "--controller", "circle_baseline", "--out", str(scen)]) == 0
        sc = Scenario.load(scen)
        scen.write_text(sc.replace(n_observations=3).to_json())
        out = tmp_path / "r.csv"
        assert main(["simulate", str(scen), "--trials", "2", "--seed", "4", "--out", str(out)]) == 0
        rows = csv_rows(out.read_text())
        assert rows[0] == CSV_HEADER
        assert len(rows) == 1 + 2 * 3 * 5
        assert {r[0] for r in rows[1:]} == {"0", "1"}

    def test_simulate_is_reproducible(self, tmp_path):
        scen = tmp_path / "s.json"
        quick_static(n_observations=3).save(scen)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", str(scen), "--seed", "9", "--out", str(a)])
        main(["simulate", str(scen), "--seed", "9", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_calibrate_then_use_model(self, tmp_path):
        model = tmp_path / "m.json"
        assert main(["calibrate", "--samples", "300", "--seed", "1", "--out", str(model)]) == 0
        scen = tmp_path / "lab.json"
        lab_scenario(Controller.GRID_SQUARE, n_observations=3).save(scen)
        out = tmp_path / "r.csv"
        assert main(["simulate", str(scen), "--noise-model", str(model), "--out", str(out)]) == 0
        assert len(csv_rows(out.read_text())) == 1 + 3 * 3

    def test_calibrate_from_file(self, tmp_path):
        from stereonbv.noise_calibration import BiasModel, synth_training_set
        train = synth_training_set(CameraRig.from_fov(0.04, 54, 43), BiasModel(), 0.1 * np.eye(3), n=100)
        data = tmp_path / "train.csv"
        lines = ["xl,xr,y,xl_true,xr_true,y_true"]
        lines += [",".join(repr(float(v)) for v in (*a, *b)) for a, b in zip(train.raw, train.y)]
        data.write_text("\n".join(lines) + "\n")
        model = tmp_path / "m.json"
        assert main(["calibrate", "--data", str(data), "--out", str(model)]) == 0
        assert model.exists()

    def test_compare(self, tmp_path):
        scen = tmp_path / "s.json"
        static_scenario(n_observations=3).save(scen)
        out = tmp_path / "c.csv"
        assert main(["compare", str(scen), "--trials", "1", "--out", str(out)]) == 0
        rows = csv_rows(out.read_text())
        assert {r[2] for r in rows[1:]} == {c.value for c in
                                            (Controller.NBV_SUPREMUM, Controller.NBV_CENTROID,
                                             Controller.STRAIGHT_BASELINE, Controller.CIRCLE_BASELINE)}
