"""Integer-order Bessel and Hankel functions of real argument.

J_m is computed with Miller's backward recurrence normalised by
J_0 + 2 sum J_2n = 1, which gives full relative accuracy for every order
below the starting index, including the tiny high-order values the
Fourier-Bessel expansions depend on. Y_m comes from the Neumann series in
even/odd J's (no cancellation for any x) followed by the stable upward
recurrence.

All array routines broadcast over ``x`` and return an array with a
leading order axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061

_BIG = 1e200
_SMALL = 1e-200


class BesselDomainError(ValueError):
    """Argument outside the supported real domain."""


@dataclass(frozen=True)
class BesselSeq:
    order_max: int
    argument: float
    values: np.ndarray

    def __getitem__(self, m: int) -> float:
        return float(self.values[m])


def miller_start(m_max: int, x_max: float) -> int:
    # m_max + 20 + ceil(x) is short of the minimal-solution regime at large x
    # (the turning point region scales like x**(1/3)); the extra term fixes it.
    return int(m_max + 20 + math.ceil(x_max) + math.ceil(6.0 * x_max ** (1.0 / 3.0)))


def jn_array(m_max: int, x) -> np.ndarray:
    """J_0..J_{m_max} at every entry of ``x``; shape (m_max + 1,) + x.shape."""
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise BesselDomainError("Bessel J requires finite x >= 0")
    shape = x.shape
    xf = x.ravel()
    out = np.zeros((m_max + 1, xf.size))
    if xf.size == 0:
        return out.reshape((m_max + 1,) + shape)

    zero = xf == 0.0
    xs = np.where(zero, 1.0, xf)
    start = miller_start(m_max, float(xs.max()))
    if start % 2:
        start += 1

    j_next = np.zeros_like(xs)
    j_cur = np.full_like(xs, 1e-30)
    norm = np.zeros_like(xs)
    two_over_x = 2.0 / xs
    for m in range(start, 0, -1):
        if m <= m_max:
            out[m] = j_cur
        if m % 2 == 0:
            norm += 2.0 * j_cur
        j_prev = m * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > _BIG
        if np.any(big):
            scale = np.where(big, _SMALL, 1.0)
            j_cur = j_cur * scale
            j_next = j_next * scale
            norm = norm * scale
            if m <= m_max:
                out[m:] *= scale
    out[0] = j_cur
    norm += j_cur
    out /= norm
    out[:, zero] = 0.0
    out[0, zero] = 1.0
    return out.reshape((m_max + 1,) + shape)


def bessel_j_series(m: int, x: float, terms: int = 200) -> float:
    """Defining power series (z/2)^m sum (-1)^n (z/2)^{2n} / (n! (n+m)!)."""
    if m < 0:
        return (-1) ** (-m) * bessel_j_series(-m, x, terms)
    if x < 0:
        raise BesselDomainError("x must be >= 0")
    half = 0.5 * x
    term = half**m / math.factorial(m) if m < 171 else math.exp(m * math.log(half) - math.lgamma(m + 1)) if half > 0 else 0.0
    total = term
    q = -half * half
    for n in range(1, terms):
        term *= q / (n * (n + m))
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    return total


def bessel_j(m: int, x: float) -> float:
    if x < 0:
        raise BesselDomainError(f"x = {x} < 0")
    if m < 0:
        return (-1) ** (-m) * bessel_j(-m, x)
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    if x <= 2.0 and 0.25 * x * x <= m + 1:
        return bessel_j_series(m, x)
    return float(jn_array(m, x)[m])


def bessel_j_seq(m_max: int, x: float) -> BesselSeq:
    if x < 0:
        raise BesselDomainError(f"x = {x} < 0")
    return BesselSeq(m_max, float(x), jn_array(m_max, x))


def yn_array(m_max: int, x) -> np.ndarray:
    """Y_0..Y_{m_max}; x must be strictly positive."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise BesselDomainError("Bessel Y requires finite x > 0")
    xmax = float(x.max()) if x.size else 1.0
    n_even = miller_start(0, xmax) // 2 + 2
    jall = jn_array(2 * n_even + 1, x)
    log_term = np.log(0.5 * x) + EULER_GAMMA
    ks = np.arange(1, n_even + 1)
    sign = (-1.0) ** ks
    shape = (-1,) + (1,) * x.ndim
    coef = (sign / ks).reshape(shape)
    s0 = np.sum(coef * jall[2 * ks], axis=0)
    s1 = np.sum(coef * (jall[2 * ks - 1] - jall[2 * ks + 1]), axis=0)
    y = np.empty((max(m_max, 1) + 1,) + x.shape)
    y[0] = (2.0 / np.pi) * (log_term * jall[0]) - (4.0 / np.pi) * s0
    y[1] = (2.0 / np.pi) * (log_term * jall[1] - jall[0] / x) + (2.0 / np.pi) * s1
    for m in range(1, m_max):
        y[m + 1] = (2.0 * m / x) * y[m] - y[m - 1]
    return y[: m_max + 1]


def bessel_y(m: int, x: float) -> float:
    if m < 0:
        return (-1) ** (-m) * bessel_y(-m, x)
    return float(yn_array(m, x)[m])


def hankel1_array(m_max: int, x) -> np.ndarray:
    return jn_array(m_max, x) + 1j * yn_array(m_max, x)


def hankel1(m: int, x: float) -> complex:
    """H^(1)_m(x) = J_m(x) + i Y_m(x) for x > 0."""
    if x <= 0:
        raise BesselDomainError(f"Hankel function needs x > 0, got {x}")
    if m < 0:
        return (-1) ** (-m) * hankel1(-m, x)
    return complex(hankel1_array(m, x)[m])


def hankel1_derivative(m: int, x: float) -> complex:
    if x <= 0:
        raise BesselDomainError(f"Hankel function needs x > 0, got {x}")
    h = hankel1_array(abs(m) + 1, x)

    def at(n):
        return h[n] if n >= 0 else (-1) ** (-n) * h[-n]

    return complex(0.5 * (at(m - 1) - at(m + 1)))


def bessel_j_derivative(m: int, x: float) -> float:
    return 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))


def h0_h1(x, chunk: int = 1 << 15) -> tuple[np.ndarray, np.ndarray]:
    """H_0^(1) and H_1^(1) at an array of positive arguments (kernel helper).

    Works in chunks so the Neumann series scratch space stays bounded for
    full kernel matrices.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    h0 = np.empty(flat.size, complex)
    h1 = np.empty(flat.size, complex)
    for s in range(0, flat.size, chunk):
        h = hankel1_array(1, flat[s : s + chunk])
        h0[s : s + chunk] = h[0]
        h1[s : s + chunk] = h[1]
    return h0.reshape(x.shape), h1.reshape(x.shape)


def jn_normalized_array(m_max: int, x) -> np.ndarray:
    """rho_m(x) = J_m(x) m! / (x/2)^m for m = 0..m_max (rho_m(0) = 1).

    J_m underflows long before the orders the Fourier-Bessel sums use; rho_m
    stays of moderate size, and log J_m = m log(x/2) - log m! + log rho_m. The
    values follow from the backward recurrence

        rho_{m-1} = rho_m - (x/2)^2 rho_{m+1} / (m (m + 1)),

    started from the power series at an order where it is well conditioned.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise BesselDomainError("normalized Bessel J requires finite x >= 0")
    q = 0.25 * x * x
    top = max(m_max, int(math.ceil(4 * float(q.max()) if x.size else 0)), 8) + 2

    def series(m):
        term = np.ones_like(x)
        total = np.ones_like(x)
        for n in range(1, 400):
            term = term * (-q) / (n * (n + m))
            total = total + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        return total

    out = np.empty((m_max + 1,) + x.shape)
    r_next, r_cur = series(top + 1), series(top)
    for m in range(top, 0, -1):
        if m <= m_max:
            out[m] = r_cur
        r_prev = r_cur - q * r_next / (m * (m + 1))
        r_next, r_cur = r_cur, r_prev
    out[0] = r_cur
    return out
