"""Ground-truth target placement and motion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MobileTrajectory:
    """Circular path: ``center + radius * (cos a u + sin a v)``, a = phase + rate t.

    (u, v) span the plane orthogonal to ``normal``.
    """

    center: tuple[float, float, float]
    radius: float
    rate: float
    phase: float = 0.0
    normal: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ring radius must be positive")

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        n = np.asarray(self.normal, float)
        n = n / np.linalg.norm(n)
        helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = helper - (helper @ n) * n
        u /= np.linalg.norm(u)
        return u, np.cross(n, u)

    def position(self, t: float) -> np.ndarray:
        u, v = self.basis()
        a = self.phase + self.rate * t
        return np.asarray(self.center, float) + self.radius * (math.cos(a) * u + math.sin(a) * v)


def olympic_targets(t: float, trajectories) -> np.ndarray:
    """Positions (n, 3) of all targets at time ``t``."""
    return np.array([tr.position(t) for tr in trajectories])


@dataclass
class RingLayout:
    """Five interlocking rings, three over two, lying in the plane orthogonal to ``normal``.

    Ring centers are ``spacing`` radii apart within a row; the lower row is
    offset by half a spacing and one radius.  Adjacent rings turn in opposite
    directions at ``rate`` rad/s.
    """

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = 1.0
    spacing: float = 2.2
    rate: float = 1.0
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def ring_centers(self) -> np.ndarray:
        s, r = self.spacing * self.radius, self.radius
        offsets2d = [(-s, r / 2), (0.0, r / 2), (s, r / 2), (-s / 2, -r / 2), (s / 2, -r / 2)]
        probe = MobileTrajectory(tuple(self.center), 1.0, 0.0, normal=tuple(self.normal))
        u, v = probe.basis()
        c = np.asarray(self.center, float)
        return np.array([c + a * u + b * v for a, b in offsets2d])

    def trajectories(self, n: int, phases) -> list[MobileTrajectory]:
        centers = self.ring_centers()
        out = []
        for i in range(n):
            ring = i % len(centers)
            rate = self.rate if ring % 2 == 0 else -self.rate
            out.append(MobileTrajectory(tuple(centers[ring]), self.radius, rate, float(phases[i]),
                                        tuple(np.asarray(self.normal, float))))
        return out


def uniform_cube(rng: np.random.Generator, n: int, center, size: float = 1.0) -> np.ndarray:
    """``n`` points uniform in the axis-aligned cube of edge ``size`` around ``center``."""
    return np.asarray(center, float) + rng.uniform(-size / 2, size / 2, (n, 3))
