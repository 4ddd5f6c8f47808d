"""Radiating fields represented by point monopoles and dipoles.

A discrete layer potential is a finite sum

    u_s(x) = sum_j a_j Phi(x, y_j) + b_j . grad_y Phi(x, y_j),
    Phi(x, y) = (i/4) H_0^(1)(k |x - y|),

so every quantity downstream (far field, Cauchy data on a circle, pairing
with an entire Helmholtz solution) is an exact closed form of the source
list, not a further quadrature.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ..specfun import h0_h1


def far_field_constant(k: float) -> complex:
    """Phi(x, y) ~ c e^{ik|x|} / sqrt|x| e^{-ik xhat.y} as |x| -> infinity."""
    return cmath.exp(1j * math.pi / 4) / math.sqrt(8.0 * math.pi * k)


@dataclass(frozen=True, eq=False)
class SourceModel:
    k: float
    points: np.ndarray
    monopoles: np.ndarray
    dipoles: np.ndarray

    def __post_init__(self):
        n = len(self.points)
        if self.points.shape != (n, 2) or self.monopoles.shape != (n,) or self.dipoles.shape != (n, 2):
            raise ValueError("inconsistent source array shapes")

    @classmethod
    def empty(cls, k: float) -> "SourceModel":
        return cls(k, np.zeros((0, 2)), np.zeros(0, complex), np.zeros((0, 2), complex))

    @property
    def radius(self) -> float:
        return float(np.hypot(*self.points.T).max()) if len(self.points) else 0.0

    def scaled(self, c: complex) -> "SourceModel":
        return SourceModel(self.k, self.points, c * self.monopoles, c * self.dipoles)

    def translated(self, b) -> "SourceModel":
        return SourceModel(self.k, self.points + np.asarray(b, float), self.monopoles, self.dipoles)

    def combined(self, other: "SourceModel") -> "SourceModel":
        return SourceModel(
            self.k,
            np.vstack([self.points, other.points]),
            np.concatenate([self.monopoles, other.monopoles]),
            np.vstack([self.dipoles, other.dipoles]),
        )

    def far_field(self, angles) -> np.ndarray:
        ang = np.asarray(angles, float)
        xh = np.stack([np.cos(ang), np.sin(ang)], axis=-1).reshape(-1, 2)
        phase = np.exp(-1j * self.k * (xh @ self.points.T))
        strength = self.monopoles[None, :] - 1j * self.k * (xh @ self.dipoles.T)
        out = far_field_constant(self.k) * np.sum(phase * strength, axis=1)
        return out.reshape(ang.shape)

    def field(self, x, chunk: int = 2048):
        """Scattered field and its gradient at points away from the sources."""
        x = np.asarray(x, float)
        flat = x.reshape(-1, 2)
        val = np.zeros(len(flat), complex)
        grad = np.zeros((len(flat), 2), complex)
        k = self.k
        for s in range(0, len(flat), chunk):
            xs = flat[s : s + chunk]
            d = xs[:, None, :] - self.points[None, :, :]
            r = np.hypot(d[..., 0], d[..., 1])
            if np.any(r < 1e-12):
                raise ValueError("field evaluated on top of a source point")
            h0, h1 = h0_h1(k * r)
            e = d / r[..., None]
            # monopoles
            val[s : s + chunk] += (0.25j * h0) @ self.monopoles
            grad[s : s + chunk] += np.einsum("pj,pjc,j->pc", -0.25j * k * h1, e, self.monopoles)
            # dipoles: b . grad_y Phi = (ik/4) H1(kr) (b . e)
            be = np.einsum("pjc,jc->pj", e, self.dipoles)
            val[s : s + chunk] += np.sum(0.25j * k * h1 * be, axis=1)
            h1p = h0 - h1 / (k * r)
            term_e = (0.25j * k) * (k * h1p - h1 / r) * be
            grad[s : s + chunk] += np.einsum("pj,pjc->pc", term_e, e)
            grad[s : s + chunk] += np.einsum("pj,jc->pc", 0.25j * k * h1 / r, self.dipoles)
        return val.reshape(x.shape[:-1]), grad.reshape(x.shape)

    def pair(self, value_and_gradient) -> complex:
        """FF_CONST * sum_j a_j v(y_j) + b_j . grad v(y_j) for an entire solution v.

        Equals the far-field pairing int F(-phi) g(phi) dsigma when v is the
        Herglotz wave of g.
        """
        v, gv = value_and_gradient(self.points)
        total = np.sum(self.monopoles * v) + np.sum(self.dipoles * gv)
        return complex(far_field_constant(self.k) * total)

    def plane_wave_moments(self, m_max: int) -> np.ndarray:
        """Exact int F(-phi) phi^m dsigma for m = -m_max..m_max."""
        from ..farfield import source_moments

        return source_moments(self, m_max)


def plane_wave(x, k: float, d) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, float)
    d = np.asarray(d, float)
    val = np.exp(1j * k * (x @ d))
    return val, val[..., None] * (1j * k * d)
