"""Galerkin hypersingular solver on graded piecewise-linear meshes.

The double layer u_s = D phi has normal derivative T phi, which in weak form
(Maue's identity) only involves the weakly singular kernel:

    <T phi, chi> = -int int Phi(x, y) phi'(y) chi'(x) + k^2 (nu_x . nu_y) Phi(x, y) phi(y) chi(x)

(primes are arc-length derivatives). Continuous hat functions on a mesh that
is graded towards every vertex therefore suffice. Open arcs (cracks) drop the
hats at the two tips, where the jump vanishes; closed loops keep every hat
and add -i eta (K' - 1/2) for the resonance-free combined formulation
u_s = D phi - i eta S phi.

Near-singular element pairs split Phi into -log(r)/(2 pi) plus a smooth
remainder. The logarithmic part is integrated exactly over the inner
element and with Gauss-Legendre over the outer one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss

from ..geometry import CrackSet, PolygonalObstacle
from ..specfun import EULER_GAMMA, h0_h1
from .model import SourceModel, plane_wave
from .obstacle import _factor_and_check
from .solution import RESONANCE_THRESHOLD, InputError, ResonanceError, ScatterSolution, check_wave

Q_FAR = 6
Q_REG = 8
Q_OUTER = 24
NEAR_FACTOR = 2.5


def _gauss01(n):
    x, w = leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def graded_points(n: int, q: float) -> np.ndarray:
    """n + 1 points on [0, 1], clustered like dist**q at both ends."""
    u = np.linspace(0.0, 1.0, n + 1)
    return np.where(u <= 0.5, 0.5 * (2 * u) ** q, 1 - 0.5 * (2 - 2 * u) ** q)


@dataclass(frozen=True, eq=False)
class GalerkinMesh:
    a: np.ndarray
    b: np.ndarray
    edge: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_dof: int
    elems_per_edge: int
    grading: float

    @property
    def h(self):
        d = self.b - self.a
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def tangent(self):
        return (self.b - self.a) / self.h[:, None]

    @property
    def normal(self):
        t = self.tangent
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def __len__(self):
        return len(self.h)

    @classmethod
    def build(cls, chains, closed: bool, elems_per_edge: int = 24, grading: float = 3.0) -> "GalerkinMesh":
        if elems_per_edge < 2:
            raise InputError("elems_per_edge must be >= 2")
        g = graded_points(elems_per_edge, grading)
        a, b, edge, left, right = [], [], [], [], []
        n_dof = 0
        edge_id = 0
        for chain in chains:
            verts = np.asarray(chain, float)
            ends = list(zip(verts[:-1], verts[1:]))
            if closed:
                ends.append((verts[-1], verts[0]))
            pts = [verts[0]]
            for p0, p1 in ends:
                pts.extend(p0 + g[1:, None] * (p1 - p0))
                edge.extend([edge_id] * elems_per_edge)
                edge_id += 1
            pts = np.array(pts)
            m = len(pts) - 1
            a.append(pts[:-1])
            b.append(pts[1:])
            if closed:
                node_dof = n_dof + np.arange(m)
                left.append(node_dof)
                right.append(np.roll(node_dof, -1))
                n_dof += m
            else:
                node_dof = np.full(m + 1, -1)
                node_dof[1:-1] = n_dof + np.arange(m - 1)
                left.append(node_dof[:-1])
                right.append(node_dof[1:])
                n_dof += m - 1
        return cls(
            np.vstack(a),
            np.vstack(b),
            np.array(edge),
            np.concatenate(left),
            np.concatenate(right),
            n_dof,
            elems_per_edge,
            grading,
        )


def _phi_and_dphi(d, k, normal_x=None):
    """Phi and d Phi / d nu_x for difference vectors d = x - y (r > 0)."""
    r = np.hypot(d[..., 0], d[..., 1])
    h0, h1 = h0_h1(k * r)
    phi = 0.25j * h0
    if normal_x is None:
        return phi, None
    dn = np.einsum("...c,...c->...", d, normal_x)
    return phi, (-0.25j * k) * h1 * dn / r


def _log_moments(p, q, h):
    """int_0^h log|x - y| ds and int_0^h s log|x - y| ds; p, q local coordinates of x."""

    def f0(u):
        rr = u * u + q * q
        lg = np.where(rr > 0, np.log(np.where(rr > 0, rr, 1.0)), 0.0)
        aq = np.abs(q)
        at = np.where(aq > 0, aq * np.arctan(u / np.where(aq > 0, aq, 1.0)), 0.0)
        return 0.5 * (u * lg - 2 * u + 2 * at)

    def f1(u):
        rr = u * u + q * q
        lg = np.where(rr > 0, np.log(np.where(rr > 0, rr, 1.0)), 0.0)
        return 0.25 * (rr * lg - u * u)

    u0, u1 = -p, h - p
    l0 = f0(u1) - f0(u0)
    l1 = f1(u1) - f1(u0) + p * l0
    return l0, l1


def _dlp_moments(p, q, h, alpha, beta):
    """int_0^h (x - y).nu_x / |x - y|^2 ds and the s-weighted version.

    alpha = t_f . nu_x, beta = n_f . nu_x.
    """
    nz = np.abs(q) > 1e-14 * h
    qs = np.where(nz, q, 1.0)

    def atn(u):
        return np.where(nz, np.arctan(u / qs), 0.0)

    def lg(u):
        return np.log(u * u + q * q)

    u0, u1 = -p, h - p
    dat = atn(u1) - atn(u0)
    dlg = lg(u1) - lg(u0)
    m0 = -0.5 * alpha * dlg + beta * dat
    m1 = -alpha * (h - q * dat) + 0.5 * (q * beta - p * alpha) * dlg + p * beta * dat
    return m0, m1


def _pair_integrals(mesh: GalerkinMesh, k: float, with_kprime: bool):
    """S[e, f, a, b] = int_e int_f Phi lam_a lam_b and the K' analogue."""
    n = len(mesh)
    h, nu = mesh.h, mesh.normal
    ab = mesh.b - mesh.a
    s, w = _gauss01(Q_FAR)
    lam = np.stack([1 - s, s])
    x = mesh.a[:, None, :] + s[None, :, None] * ab[:, None, :]
    wx = w[None, :] * h[:, None]
    S = np.zeros((n, n, 2, 2), complex)
    K = np.zeros((n, n, 2, 2), complex) if with_kprime else None
    block = max(1, 40000 // (n * Q_FAR * Q_FAR) + 1)
    for e0 in range(0, n, block):
        e1 = min(n, e0 + block)
        d = x[e0:e1, :, None, None, :] - x[None, None, :, :, :]
        nx = np.broadcast_to(nu[e0:e1, None, None, None, :], d.shape) if with_kprime else None
        r = np.hypot(d[..., 0], d[..., 1])
        bad = r == 0
        d = np.where(bad[..., None], 1.0, d)
        phi, dphi = _phi_and_dphi(d, k, nx)
        ww = wx[e0:e1, :, None, None] * wx[None, None, :, :]
        S[e0:e1] = np.einsum("egfq,ag,bq->efab", phi * ww, lam, lam)
        if with_kprime:
            K[e0:e1] = np.einsum("egfq,ag,bq->efab", dphi * ww, lam, lam)

    c = 0.5 * (mesh.a + mesh.b)
    dist = np.hypot(*(c[:, None, :] - c[None, :, :]).transpose(2, 0, 1))
    near_e, near_f = np.nonzero(dist < NEAR_FACTOR * np.maximum(h[:, None], h[None, :]))
    Sn, Kn = _near_pairs(mesh, k, near_e, near_f, with_kprime)
    S[near_e, near_f] = Sn
    if with_kprime:
        K[near_e, near_f] = Kn
        same_edge = mesh.edge[:, None] == mesh.edge[None, :]
        K[same_edge] = 0.0
    return S, K


def _near_pairs(mesh, k, ie, jf, with_kprime):
    h, nu, tg = mesh.h, mesh.normal, mesh.tangent
    ab = mesh.b - mesh.a
    P = len(ie)
    phi_reg0 = 0.25j - (math.log(k / 2) + EULER_GAMMA) / (2 * math.pi)

    # smooth remainder: tensor Gauss
    s, w = _gauss01(Q_REG)
    lam = np.stack([1 - s, s])
    x = mesh.a[ie, None, :] + s[None, :, None] * ab[ie, None, :]
    y = mesh.a[jf, None, :] + s[None, :, None] * ab[jf, None, :]
    d = x[:, :, None, :] - y[:, None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    zero = r < 1e-300
    r_safe = np.where(zero, 1.0, r)
    h0, h1 = h0_h1(k * r_safe)
    reg = np.where(zero, phi_reg0, 0.25j * h0 + np.log(r_safe) / (2 * math.pi))
    ww = (w[None, :, None] * h[ie, None, None]) * (w[None, None, :] * h[jf, None, None])
    Sn = np.einsum("pgq,ag,bq->pab", reg * ww, lam, lam)
    Kn = None
    if with_kprime:
        dn = np.einsum("pgqc,pc->pgq", d, nu[ie])
        kreg = np.where(zero, 0.0, dn * ((-0.25j * k) * h1 / r_safe + 1 / (2 * math.pi * r_safe**2)))
        Kn = np.einsum("pgq,ag,bq->pab", kreg * ww, lam, lam)

    # logarithmic part: outer Gauss, inner exact
    so, wo = _gauss01(Q_OUTER)
    lo = np.stack([1 - so, so])
    xo = mesh.a[ie, None, :] + so[None, :, None] * ab[ie, None, :]
    rel = xo - mesh.a[jf, None, :]
    p = np.einsum("poc,pc->po", rel, tg[jf])
    q = np.einsum("poc,pc->po", rel, nu[jf])
    hf = h[jf, None]
    l0, l1 = _log_moments(p, q, hf)
    inner = np.stack([l0 - l1 / hf, l1 / hf], axis=-1) * (-1 / (2 * math.pi))
    wout = wo[None, :] * h[ie, None]
    Sn = Sn + np.einsum("po,ao,pob->pab", wout, lo, inner)
    if with_kprime:
        alpha = np.einsum("pc,pc->p", tg[jf], nu[ie])[:, None]
        beta = np.einsum("pc,pc->p", nu[jf], nu[ie])[:, None]
        m0, m1 = _dlp_moments(p, q, hf, alpha, beta)
        inner_k = np.stack([m0 - m1 / hf, m1 / hf], axis=-1) * (-1 / (2 * math.pi))
        Kn = Kn + np.einsum("po,ao,pob->pab", wout, lo, inner_k)
    return Sn, Kn


def _scatter(mesh: GalerkinMesh, blocks: np.ndarray) -> np.ndarray:
    A = np.zeros((mesh.n_dof, mesh.n_dof), complex)
    dofs = np.stack([mesh.left, mesh.right], axis=1)
    for a in range(2):
        for b in range(2):
            rows = dofs[:, a][:, None]
            cols = dofs[:, b][None, :]
            ok = (rows >= 0) & (cols >= 0)
            R = np.broadcast_to(rows, ok.shape)[ok]
            C = np.broadcast_to(cols, ok.shape)[ok]
            np.add.at(A, (R, C), blocks[:, :, a, b][ok])
    return A


def assemble(mesh: GalerkinMesh, k: float, eta: float | None = None) -> np.ndarray:
    """Galerkin matrix of T, or of T - i eta (K' - 1/2) when ``eta`` is given."""
    S, K = _pair_integrals(mesh, k, eta is not None)
    h, nu = mesh.h, mesh.normal
    sigma = np.array([-1.0, 1.0])
    Ssum = S.sum(axis=(2, 3))
    blocks = -(Ssum / np.outer(h, h))[:, :, None, None] * np.outer(sigma, sigma)[None, None]
    blocks = blocks + k * k * (nu @ nu.T)[:, :, None, None] * S
    if eta is not None:
        blocks = blocks - 1j * eta * K
        mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6
        idx = np.arange(len(mesh))
        blocks[idx, idx] += 0.5j * eta * h[:, None, None] * mass
    return _scatter(mesh, blocks)


def load_vector(mesh: GalerkinMesh, k: float, d) -> np.ndarray:
    s, w = _gauss01(Q_FAR)
    lam = np.stack([1 - s, s])
    x = mesh.a[:, None, :] + s[None, :, None] * (mesh.b - mesh.a)[:, None, :]
    _, g = plane_wave(x, k, d)
    dn = np.einsum("egc,ec->eg", g, mesh.normal)
    vals = -np.einsum("eg,g,ag->ea", dn * mesh.h[:, None], w, lam)
    rhs = np.zeros(mesh.n_dof, complex)
    for a, dofs in enumerate((mesh.left, mesh.right)):
        ok = dofs >= 0
        np.add.at(rhs, dofs[ok], vals[ok, a])
    return rhs


def density_at_gauss(mesh: GalerkinMesh, coef: np.ndarray, n: int = Q_FAR):
    s, w = _gauss01(n)
    full = np.concatenate([coef, [0.0]])
    left = full[mesh.left]
    right = full[mesh.right]
    vals = left[:, None] * (1 - s)[None, :] + right[:, None] * s[None, :]
    x = mesh.a[:, None, :] + s[None, :, None] * (mesh.b - mesh.a)[:, None, :]
    wx = w[None, :] * mesh.h[:, None]
    return x, vals, wx


def _solve(scene, mesh, k, d, eta, method):
    A = assemble(mesh, k, eta)
    rhs = load_vector(mesh, k, d)
    factors, cond = _factor_and_check(A)
    if cond > RESONANCE_THRESHOLD:
        raise ResonanceError(f"condition estimate {cond:.3g} at k={k}: shift k slightly")
    coef = scipy.linalg.lu_solve(factors, rhs, check_finite=False)
    residual = float(np.abs(A @ coef - rhs).max() / max(np.abs(rhs).max(), 1e-300))
    x, vals, wx = density_at_gauss(mesh, coef)
    nq = x.shape[1]
    strength = (vals * wx).ravel()
    dip = strength[:, None] * np.repeat(mesh.normal, nq, axis=0)
    mono = -1j * eta * strength if eta is not None else np.zeros_like(strength)
    sources = SourceModel(k, x.reshape(-1, 2), mono, dip)
    meta = {
        "method": method,
        "unknowns": mesh.n_dof,
        "elems_per_edge": mesh.elems_per_edge,
        "grading": mesh.grading,
        "condition": cond,
        "resonance": False,
        "residual": residual,
    }
    return ScatterSolution(scene, float(k), d, coef, sources, meta)


def solve_crack(cracks: CrackSet, k: float, d, disc: GalerkinMesh | None = None, **kwargs) -> ScatterSolution:
    """Sound-hard screen: jump of u across the arcs from the hypersingular equation."""
    if not isinstance(cracks, CrackSet):
        raise InputError("solve_crack needs a CrackSet")
    d = check_wave(k, d)
    mesh = disc if disc is not None else GalerkinMesh.build(cracks.segments, closed=False, **kwargs)
    return _solve(cracks, mesh, k, d, None, "hypersingular galerkin")


def solve_obstacle_combined(
    scene: PolygonalObstacle, k: float, d, disc: GalerkinMesh | None = None, eta: float | None = None, **kwargs
) -> ScatterSolution:
    d = check_wave(k, d)
    mesh = disc if disc is not None else GalerkinMesh.build(scene.components, closed=True, **kwargs)
    return _solve(scene, mesh, k, d, float(k if eta is None else eta), "combined-source galerkin")
