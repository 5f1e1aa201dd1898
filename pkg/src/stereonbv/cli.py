"""Command line entry point: ``stereonbv {simulate,compare,calibrate,preset}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .noise_calibration import (BiasModel, RegressionModel, TrainingSet, fit, residual_covariance,
                                synth_training_set)
from .sim.batch import compare, compare_grid, batch_run
from .sim.scenario import Controller, Scenario, lab_scenario, mobile_scenario, static_scenario
from .stereo_model import CameraRig

PRESETS = {
    "static": static_scenario,
    "mobile": mobile_scenario,
    "lab": lab_scenario,
}

TRAINING_COLUMNS = ["xl", "xr", "y", "xl_true", "xr_true", "y_true"]


def _load_scenario(spec: str) -> Scenario:
    """A scenario file path, or ``preset:<name>``."""
    if spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        if name not in PRESETS:
            raise SystemExit(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return PRESETS[name]()
    return Scenario.load(spec)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _summaries(results) -> None:
    for res in results:
        s = res.summary()
        print(json.dumps(s), file=sys.stderr)


def _model(path: str | None) -> RegressionModel | None:
    return RegressionModel.load(path) if path else None


def cmd_simulate(args) -> int:
    sc = _load_scenario(args.scenario)
    if args.controller:
        sc = sc.replace(controller=Controller(args.controller))
    seed = sc.seed if args.seed is None else args.seed
    res = batch_run(sc, args.trials, seed, correction=_model(args.noise_model))
    _write(res.to_csv(), args.out)
    _summaries([res])
    return 1 if res.n_aborted else 0


def cmd_compare(args) -> int:
    sc = _load_scenario(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    runner = compare_grid if args.grid else compare
    results = runner(sc, args.trials, seed, correction=_model(args.noise_model))
    text = "".join(r.to_csv(header=(i == 0)) for i, r in enumerate(results.values()))
    _write(text, args.out)
    _summaries(results.values())
    return 0


def _read_training(path: str) -> TrainingSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(TRAINING_COLUMNS) - set(rows[0] if rows else {})
    if missing:
        raise SystemExit(f"training file lacks columns {sorted(missing)}")
    arr = np.array([[float(r[c]) for c in TRAINING_COLUMNS] for r in rows])
    return TrainingSet.from_pixels(arr[:, :3], arr[:, 3:])


def cmd_calibrate(args) -> int:
    if args.data:
        train = _read_training(args.data)
    else:
        # synthetic lab-like data: 0.4 px bias on x_L plus the reference noise level
        rig = CameraRig.from_fov(0.04, 54, 43, 70.0)
        seed = 0 if args.seed is None else args.seed
        train = synth_training_set(rig, BiasModel(), np.diag([0.1, 0.1, 0.1]), n=args.samples,
                                   seed=seed)
    model, q_hat = fit(train)
    if args.out:
        model.save(args.out)
    else:
        sys.stdout.write(model.to_json() + "\n")
    if train.raw is not None:
        raw_cov = residual_covariance(train.y, train.raw)
        print("uncorrected residual covariance:\n" + np.array2string(raw_cov, precision=4),
              file=sys.stderr)
    print("corrected residual covariance (q_hat):\n" + np.array2string(q_hat, precision=4),
          file=sys.stderr)
    return 0


def cmd_preset(args) -> int:
    sc = PRESETS[args.name]()
    if args.controller:
        sc = sc.replace(controller=Controller(args.controller))
    if args.seed is not None:
        sc = sc.replace(seed=args.seed)
    _write(sc.to_json() + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stereonbv", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log aborted trials")
    sub = p.add_subparsers(dest="command", required=True)
    controllers = [c.value for c in Controller]

    def common(sp, trials=True, seed_help="base seed (default: scenario seed)"):
        sp.add_argument("--seed", type=int, default=None, help=seed_help)
        if trials:
            sp.add_argument("--trials", type=int, default=1)
            sp.add_argument("--noise-model", default=None,
                            help="JSON correction model applied to raw pixels")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")

    sp = sub.add_parser("simulate", help="run a scenario, write per-iteration CSV")
    sp.add_argument("scenario", help="scenario JSON path or preset:<static|mobile|lab>")
    sp.add_argument("--controller", choices=controllers, default=None)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="NBV against baselines with matched travel")
    sp.add_argument("scenario", help="scenario JSON path or preset:<static|mobile|lab>")
    sp.add_argument("--grid", action="store_true",
                    help="compare against grid heuristics at matched path length")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("calibrate", help="fit a pixel correction model")
    sp.add_argument("--data", default=None, help="CSV with columns " + ",".join(TRAINING_COLUMNS))
    sp.add_argument("--samples", type=int, default=600, help="synthetic sample count without --data")
    common(sp, trials=False, seed_help="seed for synthetic data (default 0)")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("preset", help="write a preset scenario file")
    sp.add_argument("name", choices=sorted(PRESETS))
    sp.add_argument("--controller", choices=controllers, default=None)
    common(sp, trials=False)
    sp.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
