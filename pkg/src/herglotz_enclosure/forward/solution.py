from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import CrackSet, PolygonalObstacle
from .model import SourceModel, plane_wave


class InputError(ValueError):
    """Invalid arguments to a forward solve."""


class ResonanceError(RuntimeError):
    """Discrete system is numerically singular (near an interior eigenvalue)."""


RESONANCE_THRESHOLD = 1e10


def check_wave(k: float, d) -> np.ndarray:
    if not (k > 0 and math.isfinite(k)):
        raise InputError(f"wave number must be positive, got {k}")
    d = np.asarray(d, float)
    if d.shape != (2,) or abs(np.hypot(*d) - 1.0) > 1e-12:
        raise InputError(f"incident direction must be a unit 2-vector, got {d}")
    return d


@dataclass(frozen=True, eq=False)
class ScatterSolution:
    scene: PolygonalObstacle | CrackSet
    k: float
    d: np.ndarray
    density: np.ndarray
    sources: SourceModel
    metadata: dict = field(default_factory=dict)


def far_field(sol: ScatterSolution, angles) -> np.ndarray:
    return sol.sources.far_field(angles)


@dataclass(frozen=True, eq=False)
class CauchyData:
    R: float
    theta: np.ndarray
    u: np.ndarray
    du: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.R * np.stack([np.cos(self.theta), np.sin(self.theta)], axis=1)

    def pairing(self, value_and_gradient) -> complex:
        """Trapezoid rule for the circle integral of du v - dv u."""
        x = self.points
        v, gv = value_and_gradient(x)
        dv = np.einsum("pc,pc->p", gv, x) / self.R
        w = 2 * math.pi * self.R / len(self.theta)
        return complex(w * np.sum(self.du * v - dv * self.u))


def scene_radius(scene) -> float:
    return float(np.hypot(*scene.vertices.T).max())


def cauchy_data_on_circle(sol: ScatterSolution, R: float, n: int) -> CauchyData:
    """Total field and its radial derivative at n equispaced points on |x| = R."""
    if n < 1:
        raise InputError("need at least one sample point")
    if not R > scene_radius(sol.scene):
        raise InputError(f"R={R} does not enclose the scene (radius {scene_radius(sol.scene):.6g})")
    theta = 2 * math.pi * np.arange(n) / n
    x = R * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    us, gs = sol.sources.field(x)
    ui, gi = plane_wave(x, sol.k, sol.d)
    u = us + ui
    du = np.einsum("pc,pc->p", gs + gi, x) / R
    return CauchyData(float(R), theta, u, du)


def write_cauchy_csv(data: CauchyData, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "Re u", "Im u", "Re du", "Im du"])
        for t, u, du in zip(data.theta, data.u, data.du):
            w.writerow([repr(float(v)) for v in (t, u.real, u.imag, du.real, du.imag)])


def read_cauchy_csv(path, R: float) -> CauchyData:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["theta", "Re u", "Im u", "Re du", "Im du"]:
            raise InputError(f"{path}: unexpected Cauchy-data header {header}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    a = np.array(rows).reshape(-1, 5)
    return CauchyData(float(R), a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4])
