"""Explicit Herglotz densities approximating the exponential probe wave.

The probe is v(y) = exp(y . (tau w + i sqrt(tau^2 + k^2) w_perp)). A density
g_N on the unit circle with Fourier coefficients

    c_m = (1 / 2pi) * (i k / ((tau + sqrt(tau^2 + k^2)) w))^m,   |m| <= N,

produces a Herglotz wave that matches v on a disc up to tails bounded by
``truncation_certificate``. Points of the circle are identified with unit
complex numbers throughout.

Expansions are kept in the basis F_m(y) = J_m(k r) e^{i m theta}, m in Z,
where J_{-m} = (-1)^m J_m. In that basis
    (d/dy1) F_m = (k/2) (F_{m-1} - F_{m+1}),
    (d/dy2) F_m = (i k/2) (F_{m-1} + F_{m+1}),
so gradients never need finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .geometry import Direction
from .specfun import jn_array

TWO_PI = 2.0 * math.pi


class ScheduleError(ValueError):
    """Invalid (beta, R, N) for the tau(N) schedule."""


def _beta_equation(s: float) -> float:
    return 2.0 * s / math.e + math.log(s)


def beta0() -> float:
    """Unique positive root of 2s/e + log s = 0."""
    root = brentq(_beta_equation, 0.1, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    for _ in range(3):
        root -= _beta_equation(root) / (2.0 / math.e + 1.0 / root)
    return root


BETA0 = beta0()


@dataclass(frozen=True)
class ScheduleParams:
    beta: float = 0.5
    R: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.beta < BETA0):
            raise ScheduleError(f"beta must lie in (0, {BETA0:.6f}); got {self.beta}")
        if self.R <= 0:
            raise ScheduleError("R must be positive")


def tau_schedule(N: int, p: ScheduleParams) -> float:
    """tau(N) = beta N / (e R) + offset."""
    if int(N) != N or N < 1:
        raise ScheduleError(f"N must be an integer >= 1, got {N}")
    tau = p.beta * N / (math.e * p.R) + p.offset
    if tau <= 0:
        raise ScheduleError(f"tau({N}) = {tau} is not positive")
    return tau


def _q(tau: float, k: float) -> float:
    return tau + math.hypot(tau, k)


def _conj_root(tau: float, k: float) -> float:
    # sqrt(tau^2 + k^2) - tau without cancellation
    return k * k / _q(tau, k)


# --- densities ---------------------------------------------------------------

@dataclass(frozen=True)
class DensityCoeffs:
    """Trigonometric density g(phi) = sum_{|m|<=N} c_m phi^m on the unit circle."""

    N: int
    tau: float
    k: float
    omega: Direction
    coeffs: np.ndarray = field(repr=False)

    def coeff(self, m: int) -> complex:
        if abs(m) > self.N:
            return 0j
        return complex(self.coeffs[m + self.N])

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def __call__(self, phi_angle) -> np.ndarray:
        """Evaluate g at angles; powers by repeated multiplication."""
        ang = np.asarray(phi_angle, dtype=float)
        z = np.exp(1j * ang)
        zinv = np.conj(z)
        total = np.full(ang.shape, self.coeffs[self.N], dtype=complex)
        pos = np.ones_like(z)
        neg = np.ones_like(z)
        for m in range(1, self.N + 1):
            pos = pos * z
            neg = neg * zinv
            total = total + self.coeffs[self.N + m] * pos + self.coeffs[self.N - m] * neg
        return total


def density_coeffs(N: int, tau: float, k: float, omega: Direction) -> DensityCoeffs:
    if tau <= 0 or k <= 0:
        raise ValueError("tau and k must be positive")
    if N < 0:
        raise ValueError("N must be >= 0")
    ratio = 1j * k / (_q(tau, k) * omega.complex)
    coeffs = np.empty(2 * N + 1, dtype=complex)
    coeffs[N] = 1.0 / TWO_PI
    up = down = 1.0 / TWO_PI
    for m in range(1, N + 1):
        up = up * ratio
        down = down / ratio
        coeffs[N + m] = up
        coeffs[N - m] = down
    coeffs.setflags(write=False)
    return DensityCoeffs(N, float(tau), float(k), omega, coeffs)


def density_direct(phi_angle, N: int, tau: float, k: float, omega: Direction) -> np.ndarray:
    """Direct summation of the closed-form density (independent of DensityCoeffs)."""
    phi = np.exp(1j * np.asarray(phi_angle, float))
    base = 1j * k * phi / (_q(tau, k) * omega.complex)
    ms = np.arange(-N, N + 1).reshape((-1,) + (1,) * phi.ndim)
    return np.sum(base[None, ...] ** ms, axis=0) / TWO_PI


# --- probe waves ----------------------------------------------------------------

def _points(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return y


def cgo_wave(y, tau: float, k: float, omega: Direction):
    """Value and gradient of exp(y . (tau w + i sqrt(tau^2+k^2) w_perp))."""
    y = _points(y)
    zeta = tau * omega.vec + 1j * math.hypot(tau, k) * omega.perp
    val = np.exp(y @ zeta)
    grad = val[..., None] * zeta
    return val, grad


def harmonic_e_omega(y, tau: float, k: float, omega: Direction | None = None):
    """Harmonic companion whose Vekua image is the probe wave."""
    if omega is None:
        omega = Direction(0.0)
    y = _points(y)
    z = y[..., 0] + 1j * y[..., 1]
    w = omega.complex
    return np.exp(-_conj_root(tau, k) * np.conj(w) * z / 2) + np.exp(_q(tau, k) * w * np.conj(z) / 2) - 1.0


# --- Fourier-Bessel expansions ---------------------------------------------------

@dataclass(frozen=True)
class FourierBessel:
    """sum_m C_m J_m(k r) e^{i m theta} over m in [m_lo, m_lo + len(C) - 1]."""

    k: float
    m_lo: int
    coeffs: np.ndarray = field(repr=False)

    @property
    def m_hi(self) -> int:
        return self.m_lo + len(self.coeffs) - 1

    def coeff(self, m: int) -> complex:
        i = m - self.m_lo
        return complex(self.coeffs[i]) if 0 <= i < len(self.coeffs) else 0j

    def _basis(self, y, pad: int):
        y = _points(y)
        flat = y.reshape(-1, 2)
        r = np.hypot(flat[:, 0], flat[:, 1])
        safe = np.where(r > 0, r, 1.0)
        eith = np.where(r > 0, (flat[:, 0] + 1j * flat[:, 1]) / safe, 1.0)
        lo, hi = self.m_lo - pad, self.m_hi + pad
        mmax = max(abs(lo), abs(hi))
        J = jn_array(mmax, self.k * r)
        # F_m for m in [lo, hi]
        F = np.empty((hi - lo + 1, len(r)), dtype=complex)
        pos = np.ones(len(r), dtype=complex)
        powers = {0: pos}
        for m in range(1, mmax + 1):
            pos = pos * eith
            powers[m] = pos
        for idx, m in enumerate(range(lo, hi + 1)):
            if m >= 0:
                F[idx] = J[m] * powers[m]
            else:
                F[idx] = (-1) ** (-m) * J[-m] * np.conj(powers[-m])
        return F, y.shape[:-1]

    def __call__(self, y) -> np.ndarray:
        F, shape = self._basis(y, 0)
        return (self.coeffs @ F).reshape(shape)

    def value_and_gradient(self, y):
        F, shape = self._basis(y, 1)
        C = self.coeffs
        # F index: m - (m_lo - 1)
        lower = F[:-2]  # F_{m-1}
        upper = F[2:]  # F_{m+1}
        val = C @ F[1:-1]
        g1 = 0.5 * self.k * (C @ (lower - upper))
        g2 = 0.5j * self.k * (C @ (lower + upper))
        grad = np.stack([g1, g2], axis=-1)
        return val.reshape(shape), grad.reshape(shape + (2,))

    def __add__(self, other: "FourierBessel") -> "FourierBessel":
        lo = min(self.m_lo, other.m_lo)
        hi = max(self.m_hi, other.m_hi)
        c = np.zeros(hi - lo + 1, dtype=complex)
        c[self.m_lo - lo : self.m_hi - lo + 1] += self.coeffs
        c[other.m_lo - lo : other.m_hi - lo + 1] += other.coeffs
        return FourierBessel(self.k, lo, c)

    def scaled(self, s: complex) -> "FourierBessel":
        return FourierBessel(self.k, self.m_lo, s * self.coeffs)


def vekua_apply(harmonic_coeffs: dict, k: float) -> FourierBessel:
    """Map sum_m a_m r^|m| e^{i m theta} to sum_m (2/k)^|m| |m|! a_m J_|m|(k r) e^{i m theta}."""
    if not harmonic_coeffs:
        return FourierBessel(k, 0, np.zeros(1, dtype=complex))
    lo, hi = min(harmonic_coeffs), max(harmonic_coeffs)
    C = np.zeros(hi - lo + 1, dtype=complex)
    for m, a in harmonic_coeffs.items():
        n = abs(m)
        b = math.exp(n * math.log(2.0 / k) + math.lgamma(n + 1)) * a
        # J_|m| e^{i m theta} = (-1)^|m| F_m for m < 0
        C[m - lo] += b if m >= 0 else (-1) ** n * b
    return FourierBessel(k, lo, C)


def e_omega_harmonic_coeffs(M: int, tau: float, k: float, omega: Direction) -> dict:
    """Taylor coefficients of e_omega in r^|m| e^{i m theta}, |m| <= M."""
    w = omega.complex
    a_pos = -_conj_root(tau, k) * np.conj(w) / 2
    a_neg = _q(tau, k) * w / 2
    out = {0: 1.0 + 0j}
    tp = tn = 1.0 + 0j
    for m in range(1, M + 1):
        tp = tp * a_pos / m
        tn = tn * a_neg / m
        out[m] = tp
        out[-m] = tn
    return out


def plane_wave_harmonic_coeffs(M: int, k: float, phi_angle: float) -> dict:
    """Taylor coefficients of exp(i k conj(phi) z / 2) + exp(i k phi conj(z) / 2) - 1."""
    phi = complex(math.cos(phi_angle), math.sin(phi_angle))
    a_pos = 1j * k * phi.conjugate() / 2
    a_neg = 1j * k * phi / 2
    out = {0: 1.0 + 0j}
    tp = tn = 1.0 + 0j
    for m in range(1, M + 1):
        tp = tp * a_pos / m
        tn = tn * a_neg / m
        out[m] = tp
        out[-m] = tn
    return out


def herglotz_expansion(dc: DensityCoeffs) -> FourierBessel:
    """Herglotz wave of a trigonometric density: sum_m 2 pi c_m i^m F_m."""
    ms = dc.orders
    return FourierBessel(dc.k, -dc.N, TWO_PI * dc.coeffs * (1j) ** (ms % 4))


def herglotz_wave(dc: DensityCoeffs, y):
    """Value and gradient of int_{S^1} e^{i k y.phi} g_N(phi) dsigma."""
    return herglotz_expansion(dc).value_and_gradient(y)


def cgo_expansion(M: int, tau: float, k: float, omega: Direction) -> FourierBessel:
    """Truncated Fourier-Bessel series of the probe wave, |m| <= M."""
    return vekua_apply(e_omega_harmonic_coeffs(M, tau, k, omega), k)


def herglotz_quadrature(dc: DensityCoeffs, y, n: int = 512) -> np.ndarray:
    """Trapezoid rule for the defining integral (test oracle)."""
    y = _points(y)
    ang = TWO_PI * np.arange(n) / n
    phis = np.column_stack([np.cos(ang), np.sin(ang)])
    g = density_direct(ang, dc.N, dc.tau, dc.k, dc.omega)
    kernel = np.exp(1j * dc.k * (y.reshape(-1, 2) @ phis.T))
    return (kernel @ g * (TWO_PI / n)).reshape(y.shape[:-1])


# --- closed forms from the residue computation -------------------------------------

def residue_closed_form(m: int, xi, terms: int = 80) -> complex:
    """(1/2pi) int e^{theta . xi} (theta_1 + i theta_2)^m dsigma for complex xi in C^2."""
    xi1, xi2 = complex(xi[0]), complex(xi[1])
    z = xi1 + 1j * xi2
    zs = xi1 - 1j * xi2
    base = z if m >= 0 else zs
    n0 = abs(m)
    prod = zs * z / 4.0
    term = (base / 2.0) ** n0 / math.factorial(n0)
    total = term
    for n in range(1, terms):
        term = term * prod / (n * (n + n0))
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300):
            break
    return total


def residue_quadrature(m: int, xi, n: int = 256) -> complex:
    ang = TWO_PI * np.arange(n) / n
    th = np.exp(1j * ang)
    expo = np.cos(ang) * complex(xi[0]) + np.sin(ang) * complex(xi[1])
    return complex(np.mean(np.exp(expo) * th**m))


def moment_residuals(dc: DensityCoeffs, m_max: int, n_quad: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Relative residuals of the two moment systems for m = 0..m_max and m = 1..m_max.

    (ik/2)^m int conj(phi)^m g dsigma = ((tau - s) conj(w) / 2)^m,
    (ik/2)^m int phi^m g dsigma = ((tau + s) w / 2)^m.

    The integrals use the trapezoid rule on the closed-form density in
    multiprecision: the coefficients of g span (q/k)^{+-N}, far beyond the
    dynamic range of a double-precision sum.
    """
    import mpmath as mp

    tau, k, N = dc.tau, dc.k, dc.N
    if n_quad is None:
        n_quad = 2 * (N + m_max) + 8
    span = (N + m_max) * abs(math.log10(_q(tau, k) / k)) + 30
    with mp.workdps(int(span) + 10):
        w = mp.mpc(dc.omega.complex)
        q = mp.mpf(tau) + mp.sqrt(mp.mpf(tau) ** 2 + mp.mpf(k) ** 2)
        ratio = 1j * mp.mpf(k) / (q * w)
        nodes = [mp.expjpi(2 * mp.mpf(j) / n_quad) for j in range(n_quad)]
        gvals = [sum(ratio**m * z**m for m in range(-N, N + 1)) / (2 * mp.pi) for z in nodes]
        h = 2 * mp.pi / n_quad
        first, second = [], []
        for m in range(0, m_max + 1):
            lhs = (1j * mp.mpf(k) / 2) ** m * h * sum(mp.conj(z) ** m * g for z, g in zip(nodes, gvals))
            rhs = ((mp.mpf(tau) - mp.sqrt(mp.mpf(tau) ** 2 + mp.mpf(k) ** 2)) * mp.conj(w) / 2) ** m
            first.append(float(abs(lhs - rhs) / abs(rhs)))
            if m >= 1:
                lhs2 = (1j * mp.mpf(k) / 2) ** m * h * sum(z**m * g for z, g in zip(nodes, gvals))
                rhs2 = (q * w / 2) ** m
                second.append(float(abs(lhs2 - rhs2) / abs(rhs2)))
    return np.array(first), np.array(second)


# --- truncation certificate ------------------------------------------------------------

def _log_tail(x: float, n: int) -> float:
    # log of x^n / n! * e^x, the majorant of sum_{j>=n} x^j / j!
    if x <= 0:
        return -math.inf
    return n * math.log(x) - math.lgamma(n + 1) + x


def _exp_guard(logv: float) -> float:
    if logv > 700:
        raise OverflowError(f"certificate bound exp({logv:.1f}) overflows")
    return math.exp(logv)


@dataclass(frozen=True)
class TruncationCertificate:
    N: int
    tau: float
    R: float
    k: float
    bound_S: float
    bound_R: float
    bound_grad: float
    weighted: float
    weighted_total: float

    @property
    def bound_value(self) -> float:
        return self.bound_S + self.bound_R


def log_E(tau: float, N: int, k: float, R: float) -> float:
    """log of E(tau; N) = (R q / 2)^N e^{R q / 2} / N!."""
    return _log_tail(R * _q(tau, k) / 2.0, N)


def truncation_certificate(N: int, tau: float, k: float, R: float) -> TruncationCertificate:
    """Sup bounds on |y| <= R for the value and gradient of v_{g_N} - v."""
    if min(N, tau, k, R) <= 0:
        raise ValueError("N, tau, k and R must be positive")
    q = _q(tau, k)
    qc = _conj_root(tau, k)
    xs, xr = R * q / 2.0, R * qc / 2.0
    S = _exp_guard(_log_tail(xs, N + 1))
    Rb = _exp_guard(_log_tail(xr, N + 1))
    # |d_j F_m| <= (k/2)(|F_{m-1}| + |F_{m+1}|) with |F_n| <= (kR/2)^n / n!
    g_s = (q / 2.0) * _exp_guard(_log_tail(xs, N)) + (k * k / (2.0 * q)) * _exp_guard(_log_tail(xs, N + 2))
    g_r = (qc / 2.0) * _exp_guard(_log_tail(xr, N)) + (k * k / (2.0 * qc)) * _exp_guard(_log_tail(xr, N + 2))
    grad = math.sqrt(2.0) * (g_s + g_r)
    weight = _exp_guard(R * tau)
    return TruncationCertificate(
        N=N, tau=tau, R=R, k=k, bound_S=S, bound_R=Rb, bound_grad=grad,
        weighted=weight * (S + Rb), weighted_total=weight * (S + Rb + grad),
    )


def weighted_log_E(N: int, p: ScheduleParams, k: float) -> float:
    """log(e^{R tau(N)} E(tau(N); N - 1)), the quantity shown to be O(N^-inf)."""
    tau = tau_schedule(N, p)
    return p.R * tau + log_E(tau, N - 1, k, p.R)
