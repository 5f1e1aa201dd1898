"""Scenario description and its JSON file format.

A scenario file is a JSON object with ``schema_version`` plus one key per
:class:`Scenario` field.  Nested configs are objects; matrices are nested
lists (row-major).  Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import Pose
from ..nbv_planner import NbvConfig
from ..noise_calibration import REFERENCE_Q
from ..pose_controller import BarrierConfig, FlowConfig
from ..stereo_model import CameraRig
from .targets import RingLayout

SCHEMA_VERSION = 1


class Controller(enum.Enum):
    NBV_SUPREMUM = "nbv_supremum"
    NBV_CENTROID = "nbv_centroid"
    STRAIGHT_BASELINE = "straight_baseline"
    CIRCLE_BASELINE = "circle_baseline"
    GRID_SQUARE = "grid_square"
    GRID_TRIANGULAR = "grid_triangular"

    @property
    def is_nbv(self) -> bool:
        return self in (Controller.NBV_SUPREMUM, Controller.NBV_CENTROID)

    @property
    def is_grid(self) -> bool:
        return self in (Controller.GRID_SQUARE, Controller.GRID_TRIANGULAR)


class TargetMotion(enum.Enum):
    STATIC = "static"
    OLYMPIC_RINGS = "olympic_rings"


@dataclass
class TargetLayout:
    """Static target placement.

    ``kind`` is ``"uniform_cube"`` (seeded draw in a cube of edge ``size``
    around ``center``) or ``"fixed"`` (``positions`` used as given).
    """

    kind: str = "uniform_cube"
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    size: float = 1.0
    positions: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("uniform_cube", "fixed"):
            raise ValueError(f"unknown layout kind {self.kind!r}")
        self.center = np.asarray(self.center, dtype=float)
        if self.positions is not None:
            self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if self.kind == "fixed" and self.positions is None:
            raise ValueError("fixed layout needs positions")


@dataclass
class Scenario:
    rig: CameraRig
    controller: Controller = Controller.NBV_SUPREMUM
    n_targets: int = 5
    target_motion: TargetMotion = TargetMotion.STATIC
    initial_pose: Pose = field(default_factory=Pose)
    pixel_noise: np.ndarray = field(default_factory=lambda: np.eye(3))
    planner_cfg: NbvConfig = field(default_factory=NbvConfig)
    barrier_cfg: BarrierConfig = field(default_factory=BarrierConfig)
    flow_cfg: FlowConfig = field(default_factory=FlowConfig)
    n_observations: int = 25
    dt: float = 0.1
    grid_edge: float = 0.25
    seed: int = 0
    # ---- simulation plumbing beyond the core parameters ----
    target_layout: TargetLayout = field(default_factory=TargetLayout)
    rings: RingLayout = field(default_factory=RingLayout)
    randomize_ring_phases: bool = True
    observation_noise: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    quantize: bool = True
    process_noise_scale: float = 1.0
    init_var: float = 1e4
    straight_halt_fraction: float = 0.05
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    planar: bool = False

    def __post_init__(self):
        self.controller = Controller(self.controller)
        self.target_motion = TargetMotion(self.target_motion)
        self.pixel_noise = np.asarray(self.pixel_noise, dtype=float).reshape(3, 3)
        self.observation_noise = np.asarray(self.observation_noise, dtype=float).reshape(3, 3)
        self.up = np.asarray(self.up, dtype=float)
        self.up = self.up / np.linalg.norm(self.up)
        if self.n_observations < 1:
            raise ValueError("n_observations must be >= 1")
        if self.n_targets < 1:
            raise ValueError("n_targets must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if np.any(np.linalg.eigvalsh(self.pixel_noise) <= 0):
            raise ValueError("pixel_noise must be positive definite")
        if self.target_layout.kind == "fixed" and len(self.target_layout.positions) != self.n_targets:
            raise ValueError("fixed layout size does not match n_targets")

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    # ------------------------------------------------------------- JSON
    def to_dict(self) -> dict:
        pc, fc = self.planner_cfg, self.flow_cfg
        lay = self.target_layout
        return {
            "schema_version": SCHEMA_VERSION,
            "rig": {
                "baseline": self.rig.baseline, "focal": self.rig.focal,
                "width": self.rig.width, "height": self.rig.height,
                "fov_half_angle": self.rig.fov_half_angle,
                "min_disparity": self.rig.min_disparity,
            },
            "controller": self.controller.value,
            "n_targets": self.n_targets,
            "target_motion": self.target_motion.value,
            "initial_pose": {"r": _list(self.initial_pose.r), "rot": _list(self.initial_pose.rot)},
            "pixel_noise": _list(self.pixel_noise),
            "planner_cfg": {
                "gain": _list(pc.gain), "horizon": pc.horizon, "n_substeps": pc.n_substeps,
                "max_travel": pc.max_travel, "max_backtracks": pc.max_backtracks,
            },
            "barrier_cfg": {"rho": self.barrier_cfg.rho},
            "flow_cfg": {
                "step": fc.step, "duration": fc.duration,
                "retraction_interval": fc.retraction_interval, "psi_tol": fc.psi_tol,
                "grad_tol": fc.grad_tol, "max_halvings": fc.max_halvings,
            },
            "n_observations": self.n_observations,
            "dt": self.dt,
            "grid_edge": self.grid_edge,
            "seed": self.seed,
            "target_layout": {
                "kind": lay.kind, "center": _list(lay.center), "size": lay.size,
                "positions": None if lay.positions is None else _list(lay.positions),
            },
            "rings": {
                "center": _list(self.rings.center), "radius": self.rings.radius,
                "spacing": self.rings.spacing, "rate": self.rings.rate,
                "normal": _list(self.rings.normal),
            },
            "randomize_ring_phases": self.randomize_ring_phases,
            "observation_noise": _list(self.observation_noise),
            "quantize": self.quantize,
            "process_noise_scale": self.process_noise_scale,
            "init_var": self.init_var,
            "straight_halt_fraction": self.straight_halt_fraction,
            "up": _list(self.up),
            "planar": self.planar,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Scenario:
        doc = dict(doc)
        version = doc.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema_version {version!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        rig_doc = dict(doc.pop("rig"))
        if "focal" in rig_doc:
            rig = CameraRig(**rig_doc) if "fov_half_angle" in rig_doc else CameraRig.from_focal(**rig_doc)
        else:
            rig = CameraRig.from_fov(**rig_doc)
        kw = {"rig": rig}
        if "initial_pose" in doc:
            p = doc.pop("initial_pose")
            kw["initial_pose"] = Pose(p["r"], p["rot"])
        if "planner_cfg" in doc:
            kw["planner_cfg"] = NbvConfig(**doc.pop("planner_cfg"))
        if "barrier_cfg" in doc:
            kw["barrier_cfg"] = BarrierConfig(**doc.pop("barrier_cfg"))
        if "flow_cfg" in doc:
            kw["flow_cfg"] = FlowConfig(**doc.pop("flow_cfg"))
        if "target_layout" in doc:
            kw["target_layout"] = TargetLayout(**doc.pop("target_layout"))
        if "rings" in doc:
            r = dict(doc.pop("rings"))
            r = {k: (np.asarray(v, float) if k in ("center", "normal") else v) for k, v in r.items()}
            kw["rings"] = RingLayout(**r)
        kw.update(doc)
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> Scenario:
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> Scenario:
        return cls.from_json(Path(path).read_text())


def _list(a):
    return np.asarray(a, dtype=float).tolist()


# ------------------------------------------------------------------ presets

def static_scenario(controller=Controller.NBV_SUPREMUM, *, seed: int = 0,
                    max_travel: float = 3.0, n_observations: int = 25, **changes) -> Scenario:
    """Five static targets in a unit cube, camera 50 baselines west looking east.

    1024x1024 images, 70 degree field of view, Q = I, rho = 100,
    K = diag(1, 1, 7), Dt = 0.1; observations are quantized only.
    """
    rig = CameraRig.from_fov(1.0, 1024, 1024, 70.0)
    kw = dict(
        rig=rig,
        controller=controller,
        n_targets=5,
        target_motion=TargetMotion.STATIC,
        initial_pose=Pose.looking_at([-50.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        pixel_noise=np.eye(3),
        planner_cfg=NbvConfig(gain=[1.0, 1.0, 7.0], n_substeps=100,
                              max_travel=max_travel),
        barrier_cfg=BarrierConfig(rho=100.0),
        flow_cfg=FlowConfig(step=1e-2, duration=5.0),
        n_observations=n_observations,
        dt=0.1,
        seed=seed,
        target_layout=TargetLayout("uniform_cube", np.zeros(3), 1.0),
    )
    kw.update(changes)
    return Scenario(**kw)


def mobile_scenario(controller=Controller.NBV_CENTROID, *, seed: int = 0,
                    max_travel: float = 3.0, n_observations: int = 40, **changes) -> Scenario:
    """Five targets circling on Olympic rings, constant-acceleration KF model."""
    kw = dict(
        target_motion=TargetMotion.OLYMPIC_RINGS,
        rings=RingLayout(center=np.zeros(3), radius=1.0, spacing=2.2, rate=1.0),
    )
    kw.update(changes)
    return static_scenario(controller, seed=seed, max_travel=max_travel,
                           n_observations=n_observations, **kw)


LAB_Q = REFERENCE_Q


def lab_scenario(controller=Controller.NBV_SUPREMUM, *, seed: int = 0,
                 grid_edge: float = 0.25, n_observations: int = 10, **changes) -> Scenario:
    """Ground robot with a 4 cm rig and a 54x43 image, three targets, metres.

    The camera moves in the horizontal plane and starts on the grid origin,
    facing the targets.  Observation noise is Gaussian with the lab pixel
    covariance followed by quantization.
    """
    rig = CameraRig.from_fov(0.04, 54, 43, 70.0)
    targets = np.array([[0.0, 0.0, 0.0], [0.12, 0.15, 0.0], [-0.1, -0.12, 0.0]])
    start = np.array([-0.7, 0.1, 0.0])
    kw = dict(
        rig=rig,
        controller=controller,
        n_targets=3,
        target_motion=TargetMotion.STATIC,
        initial_pose=Pose.looking_at(start, targets.mean(axis=0)),
        pixel_noise=LAB_Q,
        observation_noise=LAB_Q,
        planner_cfg=NbvConfig(gain=[1.0, 1.0, 7.0], n_substeps=100,
                              max_travel=grid_edge),
        barrier_cfg=BarrierConfig(rho=1e-3),
        flow_cfg=FlowConfig(step=1e-2, duration=5.0),
        n_observations=n_observations,
        dt=0.1,
        grid_edge=grid_edge,
        seed=seed,
        target_layout=TargetLayout("fixed", positions=targets),
        planar=True,
    )
    kw.update(changes)
    return Scenario(**kw)

