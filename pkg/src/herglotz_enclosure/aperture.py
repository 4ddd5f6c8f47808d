"""Limited-aperture probing with minimum-norm Herglotz densities.

Data are known on an arc G of observation directions, so the density lives
on -G. The Herglotz operator

    (H g)(y) = int_{-G} e^{i k y.phi} g(phi) dsigma(phi)

maps L^2(-G) into H^1(B_R). Given the probe wave v, the density with
discrepancy delta is the Tikhonov solution g = (alpha + H*H)^{-1} H* v with
alpha fixed by ||H g - v|| = delta (Morozov).

The H^1(B_R) norm is evaluated in the Fourier-Bessel basis, where the modes
F_m = J_m(k r) e^{i m theta} are orthogonal with exact weights

    w_m = 2 pi [(1 + k^2) int_0^R J_m(k r)^2 r dr + k R J_m(kR) J_m'(kR)],

and e^{i k y.phi} = sum_m i^m F_m(y) e^{-i m psi} for phi = e^{i psi}. A
polar collocation grid gives an independent discretisation of the same norm
for cross-checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss

from .enclosure import IndicatorRecord, IndicatorTrace, classify_t, estimate_support
from .farfield import Aperture, FarFieldDataset
from .geometry import Direction
from .herglotz import FourierBessel, cgo_expansion, cgo_wave

LOG_ALPHA_BRACKET = (-14.0, 2.0)
LOG_ALPHA_FLOOR = -300.0
# modes of H g above M that are tracked for the indicator and the truncation diagnostic
EXTRA_MODES = 32


class ApertureInputError(ValueError):
    """Invalid arc, grid or dataset for the limited-aperture route."""


class MorozovError(RuntimeError):
    """The discrepancy equation has no root in the admissible range."""


def h1_mode_weights(M: int, k: float, R: float) -> np.ndarray:
    """log w_m for m = 0..M (w_{-m} = w_m).

    The closed form cancels heavily at high order, so it is evaluated with
    extra working precision.
    """
    out = np.empty(M + 1)
    with mpmath.workdps(40):
        x = mpmath.mpf(k) * R
        for m in range(M + 1):
            j = mpmath.besselj(m, x)
            dj = mpmath.besselj(m, x, derivative=1)
            radial = (mpmath.mpf(R) ** 2 / 2) * (dj**2 + (1 - mpmath.mpf(m) ** 2 / x**2) * j**2)
            w = 2 * mpmath.pi * ((1 + mpmath.mpf(k) ** 2) * radial + x * j * dj)
            out[m] = float(mpmath.log(w))
    return out


@dataclass(frozen=True, eq=False)
class ApertureOperator:
    gamma: Aperture
    k: float
    R: float
    nodes: np.ndarray  # angles psi_j on -G
    weights: np.ndarray
    M: int
    log_w: np.ndarray = field(repr=False)  # log H^1 weight of modes |m| = 0..M
    grid: np.ndarray = field(repr=False)  # collocation points in B_R
    grid_weights: np.ndarray = field(repr=False)
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @property
    def sqrt_w(self) -> np.ndarray:
        return np.exp(0.5 * self.log_w[np.abs(self.orders)])

    # --- spectral form -----------------------------------------------------

    def mode_matrix(self) -> np.ndarray:
        """A[m, j]: coordinates of H applied to sqrt(weight_j)-scaled densities, in the H^1-orthonormal mode basis."""
        ms = self.orders
        phase = (1j) ** (ms % 4)
        E = np.exp(-1j * np.outer(ms, self.nodes))
        return (self.sqrt_w * phase)[:, None] * E * np.sqrt(self.weights)[None, :]

    def modes_of(self, g: np.ndarray) -> np.ndarray:
        """F_m coefficients of H g for density samples g at the nodes."""
        ms = self.orders
        return (1j) ** (ms % 4) * (np.exp(-1j * np.outer(ms, self.nodes)) @ (self.weights * g))

    def h1_norm_modes(self, coeffs: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(coeffs * self.sqrt_w) ** 2)))

    # --- collocation form --------------------------------------------------

    def kernel(self, y=None):
        """Values and gradients of e^{i k y.phi_j} weight_j at the grid (or given points)."""
        y = self.grid if y is None else np.asarray(y, float)
        phi = np.stack([np.cos(self.nodes), np.sin(self.nodes)], axis=1)
        E = np.exp(1j * self.k * (y @ phi.T)) * self.weights[None, :]
        G = (1j * self.k) * E[..., None] * phi[None, :, :]
        return E, G

    def apply(self, g: np.ndarray, y=None):
        E, G = self.kernel(y)
        return E @ g, np.einsum("pjc,j->pc", G, g)

    def adjoint(self, u: np.ndarray, grad_u: np.ndarray) -> np.ndarray:
        """H* with respect to the discrete H^1 and weighted L^2(-G) inner products."""
        E, G = self.kernel()
        W = self.grid_weights
        acc = np.conj(E).T @ (W * u) + np.einsum("pjc,pc->j", np.conj(G), W[:, None] * grad_u)
        return acc / self.weights

    def h1_inner(self, u, gu, v, gv) -> complex:
        W = self.grid_weights
        return complex(np.sum(W * u * np.conj(v)) + np.sum(W[:, None] * gu * np.conj(gv)))

    def l2_inner(self, g, h) -> complex:
        return complex(np.sum(self.weights * g * np.conj(h)))

    def gram_min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the collocation Gram matrix (block diagonal in value and gradient)."""
        return float(self.grid_weights.min())


def assemble_operator(
    gamma: Aperture,
    k: float,
    R: float,
    n: int = 512,
    M: int | None = None,
    tau_max: float = 12.0,
    n_radial: int = 48,
    n_angular: int | None = None,
) -> ApertureOperator:
    """Discretise H on an n-point midpoint grid of -G.

    M (highest mode) defaults to a value resolving the probe wave up to
    ``tau_max``; the polar collocation grid uses Gauss-Legendre radii and
    uniform angles.
    """
    if not isinstance(gamma, Aperture):
        raise ApertureInputError("gamma must be an Aperture")
    if gamma.length < 1e-6:
        raise ApertureInputError("degenerate arc")
    if not (k > 0 and R > 0):
        raise ApertureInputError("k and R must be positive")
    if M is None:
        q = tau_max + math.hypot(tau_max, k)
        M = int(math.ceil(math.e * q * R / 2)) + 15
    if n < 2 * M + 1:
        raise ApertureInputError(f"n={n} density nodes cannot carry modes |m| <= {M}")
    nodes = np.mod(gamma.angles(n) + math.pi, 2 * math.pi)
    weights = np.full(n, gamma.length / n)
    log_w = h1_mode_weights(M, k, R)
    if n_angular is None:
        n_angular = 2 * M + 8
    x, wr = leggauss(n_radial)
    r = 0.5 * R * (x + 1)
    wr = 0.5 * R * wr * r
    th = 2 * math.pi * np.arange(n_angular) / n_angular
    rr, tt = np.meshgrid(r, th, indexing="ij")
    grid = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    gw = (wr[:, None] * np.full(n_angular, 2 * math.pi / n_angular)[None, :]).ravel()
    return ApertureOperator(gamma, float(k), float(R), nodes, weights, M, log_w, grid, gw)


# --- Morozov -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MinNormDensity:
    coeffs: np.ndarray  # g(psi) = sum_m coeffs[m] e^{i m psi} on -G
    samples: np.ndarray
    alpha: float
    achieved: float
    delta: float
    v_norm: float
    tau: float
    omega: Direction
    k: float
    gamma: Aperture
    M: int
    flags: dict = field(default_factory=dict)
    wave_modes: np.ndarray = field(default=None, repr=False)  # F_m coefficients of H g, |m| <= M + EXTRA_MODES
    mismatch: np.ndarray = field(default=None, repr=False)  # same for H g - v

    @property
    def wave(self) -> FourierBessel:
        L = (len(self.wave_modes) - 1) // 2
        return FourierBessel(self.k, -L, self.wave_modes)

    @property
    def mismatch_wave(self) -> FourierBessel:
        L = (len(self.mismatch) - 1) // 2
        return FourierBessel(self.k, -L, self.mismatch)

    def __call__(self, psi) -> np.ndarray:
        psi = np.asarray(psi, float)
        ms = np.arange(-self.M, self.M + 1)
        return np.exp(1j * np.multiply.outer(psi, ms)) @ self.coeffs

    @property
    def l2_norm(self) -> float:
        w = self.gamma.length / len(self.samples)
        return float(np.sqrt(w * np.sum(np.abs(self.samples) ** 2)))


class _Spectral:
    """Eigen-decomposition K = U diag(lam) U* of K = A A*, held in extended precision.

    With D = diag(sqrt(w_m) i^m) and the node Gram matrix
    G[m, n] = sum_j weight_j e^{-i (m - n) psi_j}, K = D G D*. The entries of K
    span hundreds of decades at the orders the probe waves use, so K is built
    and decomposed with mpmath; ``dps`` is the working precision.
    """

    def __init__(self, op: "ApertureOperator", dps: int):
        self.dps = dps
        with mpmath.workdps(dps):
            n = len(op.nodes)
            size = 2 * op.M + 1
            h = mpmath.mpf(op.gamma.length) / n
            a = mpmath.mpf(float(op.nodes[0]))
            total = mpmath.mpf(op.gamma.length)
            gram = {}
            for ell in range(-2 * op.M - EXTRA_MODES, 2 * op.M + EXTRA_MODES + 1):
                if ell == 0:
                    gram[ell] = mpmath.mpc(total)
                    continue
                z = mpmath.expj(-ell * h)
                if abs(z - 1) < mpmath.mpf(10) ** (-dps // 2):
                    gram[ell] = mpmath.mpc(total) * mpmath.expj(-ell * a)
                else:
                    gram[ell] = h * mpmath.expj(-ell * a) * (1 - z**n) / (1 - z)
            x = mpmath.mpf(op.k) * op.R
            d = []
            for m in range(-op.M, op.M + 1):
                j = mpmath.besselj(abs(m), x)
                dj = mpmath.besselj(abs(m), x, derivative=1)
                radial = (mpmath.mpf(op.R) ** 2 / 2) * (dj**2 + (1 - mpmath.mpf(m) ** 2 / x**2) * j**2)
                w = 2 * mpmath.pi * ((1 + mpmath.mpf(op.k) ** 2) * radial + x * j * dj)
                d.append(mpmath.sqrt(w) * mpmath.mpc(0, 1) ** (m % 4))
            K = mpmath.matrix(size, size)
            for r in range(size):
                for c in range(size):
                    K[r, c] = d[r] * gram[r - c] * mpmath.conj(d[c])
            lam, U = mpmath.eighe(K)
            self.K, self.U, self.d, self.gram = K, U, d, gram
            self.lam = [max(v, mpmath.mpf(0)) for v in lam]
            self.norm = max(abs(v) for v in lam)

    def project(self, target):
        with mpmath.workdps(self.dps):
            beta = self.U.transpose_conj() * target
            log_beta2 = np.array([2 * float(mpmath.log(abs(b))) if b != 0 else -np.inf for b in beta])
            log_lam = np.array([float(mpmath.log(v)) if v > 0 else -np.inf for v in self.lam])
        return beta, log_beta2, log_lam


def _discrepancy(log_alpha: float, log_beta2: np.ndarray, log_lam: np.ndarray) -> float:
    """||alpha (alpha + K)^{-1} v||, summed in log form (every term is positive)."""
    la = log_alpha * math.log(10)
    terms = log_beta2 + 2 * la - 2 * np.logaddexp(la, log_lam)
    top = terms.max()
    return float(math.exp(0.5 * (top + math.log(np.sum(np.exp(terms - top))))))


def _log_bisect(fun, lo: float, hi: float, target: float, rtol: float, max_iter: int = 300):
    """Bisection on log10(alpha) for an increasing function of log10(alpha)."""
    mid, fm = lo, fun(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if abs(fm - target) <= rtol * target:
            break
        if fm < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    return mid, fm


def probe_modes(op: ApertureOperator, tau: float, omega: Direction) -> np.ndarray:
    fb = cgo_expansion(op.M, tau, op.k, omega)
    return np.array([fb.coeff(m) for m in op.orders])


def _spectral(op: ApertureOperator, dps: int) -> _Spectral:
    cache = op.cache
    best = cache.get("spectral")
    if best is None or best.dps < dps:
        best = _Spectral(op, dps)
        cache["spectral"] = best
    return best


def _target(sp: _Spectral, b: np.ndarray):
    """sqrt(w_m) b_m as an mpmath column."""
    with mpmath.workdps(sp.dps):
        return mpmath.matrix([abs(d) * mpmath.mpc(complex(bm)) for d, bm in zip(sp.d, b)])


def _bracket(fun, delta: float, flags: dict):
    lo, hi = LOG_ALPHA_BRACKET
    if fun(hi) < delta:
        raise MorozovError(f"discrepancy {fun(hi):.3e} at alpha=1e{hi:g} is still below delta={delta:.3e}")
    # the default decades are too coarse at large tau; widen downwards until the root is bracketed
    while fun(lo) > delta:
        if lo <= LOG_ALPHA_FLOOR:
            raise MorozovError(f"discrepancy {fun(lo):.3e} at alpha=1e{lo:g} still exceeds delta={delta:.3e}")
        hi, lo = lo, max(lo - 10.0, LOG_ALPHA_FLOOR)
        flags["bracket_extended"] = True
    return lo, hi


def min_norm_density(
    op: ApertureOperator,
    tau: float,
    omega: Direction,
    delta: float | None = None,
    rel_delta: float = 1e-3,
    rtol: float = 1e-10,
) -> MinNormDensity:
    """Tikhonov density whose Herglotz wave misses the probe wave by delta in H^1(B_R).

    ``delta`` defaults to rel_delta * ||v||_{H^1(B_R)}. The density is a
    trigonometric polynomial of degree M; its coefficients solve
    (alpha W^{-1} + G) c = b with b the probe's mode coefficients.
    """
    b = probe_modes(op, tau, omega)
    v_norm = float(np.linalg.norm(op.sqrt_w * b))
    flags = {"delta_scaled_with_tau": delta is None}
    if delta is None:
        delta = rel_delta * v_norm
    if not delta > 0:
        raise ValueError("delta must be positive")
    if delta >= v_norm:
        warnings.warn("delta >= ||v||: the zero density already meets the discrepancy", stacklevel=2)
        n = len(op.nodes)
        return MinNormDensity(
            np.zeros(2 * op.M + 1, complex), np.zeros(n, complex), math.inf, v_norm, delta, v_norm,
            tau, omega, op.k, op.gamma, op.M, {**flags, "trivial": True},
        )
    dps = op.cache.get("dps", 60)
    while True:
        sp = _spectral(op, dps)
        target = _target(sp, b)
        beta, log_beta2, log_lam = sp.project(target)

        def fun(la):
            return _discrepancy(la, log_beta2, log_lam)

        lo, hi = _bracket(fun, delta, flags)
        log_alpha, _ = _log_bisect(fun, lo, hi, delta, rtol)
        # K is resolved to about 10^-dps ||K||; alpha must sit well above that floor
        need = int(math.ceil(math.log10(float(sp.norm)) - log_alpha)) + 30
        if need <= sp.dps:
            break
        dps = need
        op.cache["dps"] = dps
    with mpmath.workdps(sp.dps):
        alpha = mpmath.mpf(10) ** mpmath.mpf(log_alpha)
        x = sp.U * mpmath.matrix([beta[i] / (sp.lam[i] + alpha) for i in range(len(beta))])
        resid = sp.K * x - target
        achieved = float(mpmath.norm(resid))
        coeffs = [x[i] * mpmath.conj(sp.d[i]) for i in range(len(beta))]
        samples = []
        for psi in op.nodes:
            e = mpmath.expj(psi)
            powers = [e ** (-op.M)]
            for _ in range(2 * op.M):
                powers.append(powers[-1] * e)
            samples.append(complex(mpmath.fdot(coeffs, powers)))
        # F_m coefficient of H g: i^m sum_l c_l sum_j weight_j e^{-i (m - l) psi_j}
        L = op.M + EXTRA_MODES
        wave = []
        for m in range(-L, L + 1):
            acc = mpmath.fdot(coeffs, [sp.gram[m - l] for l in range(-op.M, op.M + 1)])
            wave.append(complex(acc * mpmath.mpc(0, 1) ** (m % 4)))
        coeffs = np.array([complex(c) for c in coeffs])
    wave = np.array(wave)
    fb = cgo_expansion(L, tau, op.k, omega)
    mismatch = wave - np.array([fb.coeff(m) for m in range(-L, L + 1)])
    high = np.abs(np.arange(-L, L + 1)) > op.M
    log_w = h1_mode_weights(L, op.k, op.R)[np.abs(np.arange(-L, L + 1))]
    flags["dps"] = sp.dps
    flags["h1_above_M"] = float(np.sqrt(np.sum(np.exp(log_w[high]) * np.abs(mismatch[high]) ** 2)))
    return MinNormDensity(
        coeffs, np.array(samples), float(alpha), achieved, float(delta), v_norm, tau, omega, op.k, op.gamma, op.M,
        flags, wave, mismatch,
    )


def discrepancy_curve(op: ApertureOperator, tau: float, omega: Direction, alphas) -> np.ndarray:
    sp = _spectral(op, op.cache.get("dps", 60))
    _, log_beta2, log_lam = sp.project(_target(sp, probe_modes(op, tau, omega)))
    return np.array([_discrepancy(math.log10(a), log_beta2, log_lam) for a in alphas])


# --- indicator -------------------------------------------------------------------


def limited_indicator(ds: FarFieldDataset, mnd: MinNormDensity, route: str = "auto") -> complex:
    """int_G F(phi) g(-phi) dsigma by the dataset's own quadrature.

    The "samples" route sums F_j g(phi_j + pi) directly. The density's
    coefficients grow geometrically with |m| and cancel, so for larger tau the
    sum loses everything to rounding; the "sources" route evaluates the same
    discrete sum as the source model paired with H g (exact discrete identity,
    valid when the data sit on the operator's nodes).
    """
    if route not in ("auto", "samples", "sources"):
        raise ValueError(f"unknown route {route!r}")
    if abs(ds.k - mnd.k) > 1e-12 * mnd.k:
        raise ApertureInputError("dataset and density use different k")
    a, b = ds.aperture, mnd.gamma
    if a.kind != b.kind or (not a.full and (abs(a.theta1 - b.theta1) > 1e-12 or abs(a.theta2 - b.theta2) > 1e-12)):
        raise ApertureInputError("dataset aperture does not match the density's arc")
    if math.isinf(mnd.alpha):
        return 0j
    on_nodes = ds.n == len(mnd.samples) and mnd.wave_modes is not None
    if route == "auto":
        route = "sources" if ds.sources is not None and on_nodes else "samples"
    if route == "sources":
        if ds.sources is None or not on_nodes:
            raise ApertureInputError("source route needs a source model and data on the density's nodes")
        return ds.sources.pair(mnd.wave.value_and_gradient)
    g = mnd.samples if ds.n == len(mnd.samples) else mnd(ds.angles + math.pi)
    return complex(np.sum(ds.aperture.weights(ds.n) * ds.values * g))


def limited_trace(datasets, op: ApertureOperator, omega: Direction, taus, rel_delta: float = 1e-3, route: str = "auto"):
    if isinstance(datasets, FarFieldDataset):
        datasets = [datasets]
    taus = sorted(float(t) for t in taus)
    # the largest tau needs the most working precision; solving it first avoids re-decompositions
    dens = {tau: min_norm_density(op, tau, omega, rel_delta=rel_delta) for tau in reversed(taus)}
    records = []
    for i, tau in enumerate(taus):
        total = sum(abs(limited_indicator(ds, dens[tau], route)) for ds in datasets)
        records.append(IndicatorRecord(i, tau, float(total)))
    return IndicatorTrace(omega, tuple(records), "far-field limited aperture"), [dens[t] for t in taus]


def limited_support_estimate(
    datasets, op: ApertureOperator, omega: Direction, taus, rel_delta: float = 1e-3, model: str = "log", route: str = "auto"
):
    """Support estimate from the limited-aperture indicator on a tau ladder.

    Meaningful only when the origin lies inside the obstacle; the caller
    asserts that.
    """
    trace, dens = limited_trace(datasets, op, omega, taus, rel_delta, route)
    h, diag = estimate_support(trace, model)
    diag["alphas"] = [d.alpha for d in dens]
    diag["deltas"] = [d.delta for d in dens]
    return h, trace, diag


def second_term(sources, mnd: MinNormDensity) -> complex:
    """Pairing of the scatterer's sources with H g - v (the approximation error term)."""
    return sources.pair(mnd.mismatch_wave.value_and_gradient)


__all__ = [
    "ApertureOperator",
    "MinNormDensity",
    "MorozovError",
    "ApertureInputError",
    "assemble_operator",
    "min_norm_density",
    "limited_indicator",
    "limited_trace",
    "limited_support_estimate",
    "discrepancy_curve",
    "h1_mode_weights",
    "classify_t",
    "second_term",
    "probe_modes",
]
