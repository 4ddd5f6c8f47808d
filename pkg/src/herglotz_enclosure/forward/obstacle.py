"""Sound-hard polygon scattering by a single-layer Nystrom method.

The ansatz u_s = S psi and the exterior Neumann jump relation give

    -psi/2 + K' psi = -du_i/dnu,    K'(x, y) = dPhi(x, y)/dnu(x).

On a straight edge (x - y).nu(x) = 0, so K' vanishes between points of the
same edge and the only singular behaviour left sits at the corners. Each edge
is parametrised by a Kress-type graded substitution that clusters nodes at
both corners, then sampled with the midpoint rule, so no node ever lands on a
vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..geometry import PolygonalObstacle
from ..specfun import h0_h1
from .model import SourceModel, plane_wave
from .solution import RESONANCE_THRESHOLD, InputError, ResonanceError, ScatterSolution, check_wave


def kress_grading(t, p: int):
    """Graded map of [0, 1] onto itself with p-fold clustering at both ends, and its derivative."""
    s = 2 * math.pi * np.asarray(t, float)

    def v(s):
        return (1 / p - 0.5) * ((math.pi - s) / math.pi) ** 3 + (s - math.pi) / (p * math.pi) + 0.5

    def dv(s):
        return -(3 / math.pi) * (1 / p - 0.5) * ((math.pi - s) / math.pi) ** 2 + 1 / (p * math.pi)

    a = v(s) ** p
    b = v(2 * math.pi - s) ** p
    da = p * v(s) ** (p - 1) * dv(s)
    db = -p * v(2 * math.pi - s) ** (p - 1) * dv(2 * math.pi - s)
    w = a / (a + b)
    dw = 2 * math.pi * (da * b - a * db) / (a + b) ** 2
    return w, dw


@dataclass(frozen=True, eq=False)
class BoundaryDiscretization:
    panels_per_edge: int
    grading: int
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    edge_index: np.ndarray

    @classmethod
    def build(cls, scene: PolygonalObstacle, panels_per_edge: int = 32, grading: int = 3) -> "BoundaryDiscretization":
        if panels_per_edge < 2:
            raise InputError("panels_per_edge must be >= 2")
        if grading < 1:
            raise InputError("grading exponent must be >= 1")
        t = (np.arange(panels_per_edge) + 0.5) / panels_per_edge
        if grading == 1:
            g, dg = t, np.ones_like(t)
        else:
            g, dg = kress_grading(t, grading)
        nodes, weights, normals, index = [], [], [], []
        edge = 0
        for loop in scene.components:
            for a, b in zip(loop, np.roll(loop, -1, axis=0)):
                vec = b - a
                length = math.hypot(*vec)
                tang = vec / length
                nodes.append(a + g[:, None] * vec)
                weights.append(length * dg / panels_per_edge)
                normals.append(np.tile([tang[1], -tang[0]], (panels_per_edge, 1)))
                index.append(np.full(panels_per_edge, edge))
                edge += 1
        return cls(
            panels_per_edge,
            grading,
            np.vstack(nodes),
            np.concatenate(weights),
            np.vstack(normals),
            np.concatenate(index),
        )

    def __len__(self) -> int:
        return len(self.weights)


def _kprime_matrix(disc: BoundaryDiscretization, k: float) -> np.ndarray:
    x = disc.nodes
    d = x[:, None, :] - x[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    same = disc.edge_index[:, None] == disc.edge_index[None, :]
    r_safe = np.where(same, 1.0, r)
    _, h1 = h0_h1(k * r_safe)
    dn = np.einsum("ijc,ic->ij", d, disc.normals)
    K = (-0.25j * k) * h1 * dn / r_safe
    K[same] = 0.0
    return K * disc.weights[None, :]


def _factor_and_check(A: np.ndarray):
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    anorm = np.linalg.norm(A, 1)
    (gecon,) = scipy.linalg.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    cond = math.inf if rcond == 0 else 1.0 / rcond
    return (lu, piv), cond


def solve_obstacle(
    scene: PolygonalObstacle,
    k: float,
    d,
    disc: BoundaryDiscretization | None = None,
    combined: bool = False,
    **kwargs,
) -> ScatterSolution:
    """Scattered field of a sound-hard polygon for the plane wave e^{ik x.d}.

    ``combined=True`` switches to the resonance-free combined double/single
    layer formulation (coupling eta = k by default), see ``galerkin``.
    """
    if not isinstance(scene, PolygonalObstacle):
        raise InputError("solve_obstacle needs a PolygonalObstacle")
    d = check_wave(k, d)
    if combined:
        from .galerkin import solve_obstacle_combined

        return solve_obstacle_combined(scene, k, d, **kwargs)
    if disc is None:
        disc = BoundaryDiscretization.build(scene, **kwargs)
    A = _kprime_matrix(disc, k)
    A[np.diag_indices_from(A)] -= 0.5
    _, g_inc = plane_wave(disc.nodes, k, d)
    rhs = -np.einsum("ic,ic->i", g_inc, disc.normals)
    factors, cond = _factor_and_check(A)
    if cond > RESONANCE_THRESHOLD:
        raise ResonanceError(
            f"condition estimate {cond:.3g} at k={k}: near an interior resonance; "
            "shift k slightly or use the combined-source formulation (combined=True)"
        )
    psi = scipy.linalg.lu_solve(factors, rhs, check_finite=False)
    residual = float(np.abs(A @ psi - rhs).max() / max(np.abs(rhs).max(), 1e-300))
    sources = SourceModel(k, disc.nodes.copy(), psi * disc.weights, np.zeros((len(disc), 2), complex))
    meta = {
        "method": "single-layer nystrom",
        "unknowns": len(disc),
        "panels_per_edge": disc.panels_per_edge,
        "grading": disc.grading,
        "condition": cond,
        "resonance": False,
        "residual": residual,
    }
    return ScatterSolution(scene, float(k), d, psi, sources, meta)
