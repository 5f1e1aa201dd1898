"""Multi-trial runs, aggregation and matched-budget controller comparison."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..noise_calibration import RegressionModel
from .scenario import Controller, Scenario
from .trial import TrialResult, rows_to_csv, run_trial


def pearson(a, b) -> float:
    """Pearson correlation of two series; NaN when either is constant."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class BatchResult:
    controller: Controller
    trials: list[TrialResult] = field(default_factory=list)

    def _stack(self, attr: str) -> np.ndarray:
        mats = [getattr(t, attr).mean(axis=1) for t in self.trials if t.aborted is None]
        if not mats:
            return np.empty((0, 0))
        n = min(len(m) for m in mats)
        return np.array([m[:n] for m in mats])

    @property
    def mean_error(self) -> np.ndarray:
        """Per-iteration error, averaged over targets then over trials."""
        return self._stack("errors").mean(axis=0)

    @property
    def mean_trace(self) -> np.ndarray:
        return self._stack("traces").mean(axis=0)

    @property
    def correlations(self) -> np.ndarray:
        """Per-trial correlation between the target-averaged error and trace series."""
        return np.array([pearson(t.errors.mean(axis=1), t.traces.mean(axis=1))
                         for t in self.trials if t.aborted is None])

    @property
    def mean_correlation(self) -> float:
        c = self.correlations
        c = c[np.isfinite(c)]
        return float(c.mean()) if c.size else float("nan")

    @property
    def n_aborted(self) -> int:
        return sum(t.aborted is not None for t in self.trials)

    def to_csv(self, header: bool = True) -> str:
        rows = [r for t in self.trials for r in t.rows]
        return rows_to_csv(rows, header)

    def summary(self) -> dict:
        err = self.mean_error
        return {
            "controller": self.controller.value,
            "trials": len(self.trials),
            "aborted": self.n_aborted,
            "first_error": float(err[0]) if err.size else None,
            "terminal_error": float(err[-1]) if err.size else None,
            "terminal_trace": float(self.mean_trace[-1]) if err.size else None,
            "mean_correlation": self.mean_correlation,
        }


def batch_run(scenario: Scenario, n_trials: int, base_seed: int = 0, *, budgets=None,
              path_budget=None, correction: RegressionModel | None = None) -> BatchResult:
    """Run ``n_trials`` copies of ``scenario`` with seeds ``base_seed + i``.

    ``budgets`` is ``None``, one per-iteration budget list shared by all
    trials, or a callable ``seed -> budgets``.  ``path_budget`` is likewise
    ``None``, a number or a callable ``seed -> total path length``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    out = BatchResult(scenario.controller)
    for i in range(n_trials):
        seed = base_seed + i
        b = budgets(seed) if callable(budgets) else budgets
        pb = path_budget(seed) if callable(path_budget) else path_budget
        out.trials.append(run_trial(scenario.replace(seed=seed), budgets=b, path_budget=pb,
                                    correction=correction, trial=i))
    return out


NBV_CONTROLLERS = (Controller.NBV_SUPREMUM, Controller.NBV_CENTROID)
BASELINES = (Controller.STRAIGHT_BASELINE, Controller.CIRCLE_BASELINE)


def compare(scenario: Scenario, n_trials: int, base_seed: int = 0, *,
            controllers=NBV_CONTROLLERS + BASELINES,
            correction: RegressionModel | None = None) -> dict[Controller, BatchResult]:
    """Run each controller on the same seeds.

    NBV controllers run first.  In every trial the straight and circle
    baselines then get, per iteration, the larger of the two NBV
    displacements for that seed and iteration.
    """
    controllers = [Controller(c) for c in controllers]
    results: dict[Controller, BatchResult] = {}
    for c in controllers:
        if c.is_nbv:
            results[c] = batch_run(scenario.replace(controller=c), n_trials, base_seed,
                                   correction=correction)
    nbv = [results[c] for c in NBV_CONTROLLERS if c in results]
    default = scenario.planner_cfg.max_travel
    n_moves = scenario.n_observations - 1

    def matched(seed: int):
        i = seed - base_seed
        per = np.zeros(n_moves)
        if not nbv:
            return np.full(n_moves, default)
        for res in nbv:
            d = np.asarray(res.trials[i].displacements, float)
            per[:d.size] = np.maximum(per[:d.size], d)
        return per

    for c in controllers:
        if not c.is_nbv:
            budgets = matched if c in BASELINES else None
            results[c] = batch_run(scenario.replace(controller=c), n_trials, base_seed,
                                   budgets=budgets, correction=correction)
    return {c: results[c] for c in controllers}


GRID_COMPARISON = (Controller.NBV_SUPREMUM, Controller.GRID_TRIANGULAR, Controller.GRID_SQUARE)


def compare_grid(scenario: Scenario, n_trials: int, base_seed: int = 0, *,
                 controllers=GRID_COMPARISON,
                 correction: RegressionModel | None = None) -> dict[Controller, BatchResult]:
    """NBV supremum against the grid heuristics at matched total path length.

    Each grid trial may travel at most the path length of the NBV supremum
    trial with the same seed.
    """
    controllers = [Controller(c) for c in controllers]
    nbv = batch_run(scenario.replace(controller=Controller.NBV_SUPREMUM), n_trials, base_seed,
                    correction=correction)
    lengths = {base_seed + i: t.path_length for i, t in enumerate(nbv.trials)}
    results = {}
    for c in controllers:
        if c is Controller.NBV_SUPREMUM:
            results[c] = nbv
        elif c.is_grid:
            results[c] = batch_run(scenario.replace(controller=c), n_trials, base_seed,
                                   path_budget=lengths.get, correction=correction)
        else:
            results[c] = batch_run(scenario.replace(controller=c), n_trials, base_seed,
                                   correction=correction)
    return results
