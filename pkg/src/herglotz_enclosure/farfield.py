"""Far-field datasets, their Fourier coefficients, and the pairings with densities.

Throughout, G_m = int_{S^1} F(-phi) phi^m dsigma(phi), so that a density
g = sum c_m phi^m pairs with the data as sum c_m G_m.

Two routes produce G_m:

* from samples, by the trapezoid rule on the uniform grid, using
  int F(phi) phi^m = (-1)^m int F(-phi) phi^m (no resampling);
* from the radiating source model a dataset may carry, in closed form via
  int e^{i k y.phi} phi^m dsigma = 2 pi i^m J_m(k|y|) e^{i m arg y}.

The second keeps full relative accuracy in the tiny high-order coefficients,
which the sample route cannot resolve once |G_m| drops below the rounding
level of the samples.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .forward.model import SourceModel, far_field_constant
from .herglotz import DensityCoeffs
from .specfun import jn_normalized_array

SCHEMA_VERSION = 1


class DatasetError(ValueError):
    """Malformed or unsupported far-field dataset."""


class ApertureError(ValueError):
    """Operation needs full-aperture data."""


class AliasingError(ValueError):
    """Too few samples for the requested number of Fourier coefficients."""


@dataclass(frozen=True)
class Aperture:
    kind: str = "full"
    theta1: float | None = None
    theta2: float | None = None

    def __post_init__(self):
        if self.kind == "full":
            return
        if self.kind != "arc":
            raise DatasetError(f"aperture type must be 'full' or 'arc', got {self.kind!r}")
        if self.theta1 is None or self.theta2 is None:
            raise DatasetError("arc aperture needs theta1 and theta2")
        if not self.theta2 - self.theta1 > 1e-6:
            raise DatasetError("arc aperture needs theta2 > theta1 (length > 1e-6)")
        if self.theta2 - self.theta1 > 2 * math.pi:
            raise DatasetError("arc aperture longer than the full circle")

    @property
    def full(self) -> bool:
        return self.kind == "full"

    @property
    def length(self) -> float:
        return 2 * math.pi if self.full else self.theta2 - self.theta1

    def angles(self, n: int) -> np.ndarray:
        """Sample angles: uniform periodic grid, or a midpoint grid on the arc."""
        if self.full:
            return 2 * math.pi * np.arange(n) / n
        return self.theta1 + (self.theta2 - self.theta1) * (np.arange(n) + 0.5) / n

    def weights(self, n: int) -> np.ndarray:
        return np.full(n, self.length / n)

    def to_dict(self) -> dict:
        if self.full:
            return {"type": "full"}
        return {"type": "arc", "theta1": self.theta1, "theta2": self.theta2}


@dataclass(frozen=True, eq=False)
class FarFieldDataset:
    k: float
    d: np.ndarray
    values: np.ndarray
    aperture: Aperture = Aperture()
    metadata: dict = field(default_factory=dict)
    sources: SourceModel | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or len(v) < 4:
            raise DatasetError("a dataset needs n >= 4 samples")
        if not np.all(np.isfinite(v)):
            raise DatasetError("non-finite far-field values")
        if not self.k > 0:
            raise DatasetError("k must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def angles(self) -> np.ndarray:
        return self.aperture.angles(self.n)

    def scaled(self, c: complex) -> "FarFieldDataset":
        src = self.sources.scaled(c) if self.sources is not None else None
        return FarFieldDataset(self.k, self.d, c * self.values, self.aperture, dict(self.metadata), src)

    def restricted(self, aperture: Aperture, n: int) -> "FarFieldDataset":
        """Resample on an arc; requires the source model."""
        if self.sources is None:
            raise DatasetError("restriction to a new aperture needs the source model")
        vals = self.sources.far_field(aperture.angles(n))
        return FarFieldDataset(self.k, self.d, vals, aperture, dict(self.metadata), self.sources)


def dataset_from_solution(sol, n: int = 512, aperture: Aperture = Aperture(), keep_sources: bool = True) -> FarFieldDataset:
    meta = {"scene": sol.scene.kind, **{k: v for k, v in sol.metadata.items() if k != "resonance"}}
    vals = sol.sources.far_field(aperture.angles(n))
    return FarFieldDataset(sol.k, sol.d, vals, aperture, meta, sol.sources if keep_sources else None)


# --- spectra -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FourierSpectrum:
    """G_m for |m| <= m_max, stored as coeffs[m] * exp(log_scale[m]).

    ``log_scale`` is zero for sampled spectra; exact spectra use it so that
    coefficients far below the double-precision range keep their digits.
    """

    m_max: int
    coeffs: np.ndarray
    route: str = "samples"
    log_scale: np.ndarray | None = None

    def __post_init__(self):
        if self.log_scale is None:
            object.__setattr__(self, "log_scale", np.zeros(len(self.coeffs)))

    def __getitem__(self, m: int) -> complex:
        if abs(m) > self.m_max:
            raise IndexError(f"order {m} outside |m| <= {self.m_max}")
        i = m + self.m_max
        return complex(self.coeffs[i] * math.exp(self.log_scale[i])) if self.coeffs[i] != 0 else 0j

    @property
    def values(self) -> np.ndarray:
        """G_m as plain complex numbers (tiny ones may underflow to zero)."""
        with np.errstate(under="ignore"):
            return self.coeffs * np.exp(self.log_scale)

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.m_max, self.m_max + 1)

    def scaled(self, c: complex) -> "FourierSpectrum":
        return FourierSpectrum(self.m_max, c * self.coeffs, self.route, self.log_scale)


def sample_spectrum(ds: FarFieldDataset, m_max: int) -> FourierSpectrum:
    if not ds.aperture.full:
        raise ApertureError("Fourier coefficients need full-aperture data; use the aperture module for arcs")
    if ds.n < 4 * (m_max + 1):
        raise AliasingError(f"n={ds.n} samples cannot resolve |m| <= {m_max} (need n >= {4 * (m_max + 1)})")
    ms = np.arange(-m_max, m_max + 1)
    theta = ds.angles
    phase = np.exp(1j * np.outer(ms, theta))
    g = (2 * math.pi / ds.n) * (phase @ ds.values)
    g = np.where(ms % 2 == 0, g, -g)
    return FourierSpectrum(m_max, g, "samples")


def _plane_moments(points: np.ndarray, k: float, m_lo: int, m_hi: int):
    """int e^{i k y.phi} phi^m dsigma for m in [m_lo, m_hi], in scaled form.

    Returns (mantissa, log_scale) with shapes (orders, points) and (orders,):
    the moment is 2 pi i^|m| J_|m|(k|y|) e^{i m arg y}, written as
    (k rho / 2)^|m| / |m|! times (y / rho)^m rho_|m|(k|y|) for rho = max |y|.
    """
    r = np.hypot(points[:, 0], points[:, 1])
    rho = float(r.max()) if len(r) and r.max() > 0 else 1.0
    z = (points[:, 0] + 1j * points[:, 1]) / rho
    mmax = max(abs(m_lo), abs(m_hi))
    nrm = jn_normalized_array(mmax, k * r)
    mant = np.empty((m_hi - m_lo + 1, len(r)), complex)
    logs = np.empty(m_hi - m_lo + 1)
    for idx, m in enumerate(range(m_lo, m_hi + 1)):
        n = abs(m)
        zp = z**n if m >= 0 else np.conj(z) ** n
        mant[idx] = (1j) ** (n % 4) * nrm[n] * zp
        logs[idx] = math.log(2 * math.pi) + n * math.log(k * rho / 2) - math.lgamma(n + 1)
    return mant, logs


def source_moments(model: SourceModel, m_max: int):
    """Exact G_m, |m| <= m_max, for the far field of a source model, as (mantissa, log_scale)."""
    k = model.k
    if len(model.points) == 0:
        return np.zeros(2 * m_max + 1, complex), np.zeros(2 * m_max + 1)
    I, L = _plane_moments(model.points, k, -m_max - 1, m_max + 1)
    b = model.dipoles
    bm = b[:, 0] - 1j * b[:, 1]
    bp = b[:, 0] + 1j * b[:, 1]
    base = L[1:-1]
    mono = I[1:-1] @ model.monopoles
    # b.phi = (bm phi + bp conj(phi)) / 2 shifts the order by +-1
    up = np.exp(L[2:] - base)
    down = np.exp(L[:-2] - base)
    dip = 0.5j * k * (up * (I[2:] @ bm) + down * (I[:-2] @ bp))
    return far_field_constant(k) * (mono + dip), base


def fourier_spectrum(ds: FarFieldDataset, m_max: int, route: str = "auto") -> FourierSpectrum:
    """G_m for |m| <= m_max; ``route`` is 'samples', 'sources' or 'auto'."""
    if route not in ("auto", "samples", "sources"):
        raise ValueError(f"unknown route {route!r}")
    if route == "samples" or (route == "auto" and ds.sources is None):
        return sample_spectrum(ds, m_max)
    if ds.sources is None:
        raise DatasetError("dataset carries no source model")
    mant, logs = source_moments(ds.sources, m_max)
    return FourierSpectrum(m_max, mant, "sources", logs)


def point_source_spectrum(y0, k: float, m_max: int, amplitude: complex = 1.0) -> FourierSpectrum:
    """Spectrum of the synthetic data F(-phi) = amplitude * e^{i k y0.phi}."""
    y0 = np.asarray(y0, float).reshape(1, 2)
    mant, logs = _plane_moments(y0, k, -m_max, m_max)
    return FourierSpectrum(m_max, amplitude * mant[:, 0], "closed form", logs)


def log_density_coeffs(dc: DensityCoeffs):
    """(log|c_m|, arg-phase of c_m) for |m| <= N without forming c_m itself."""
    ms = dc.orders
    q = dc.tau + math.hypot(dc.tau, dc.k)
    logabs = -math.log(2 * math.pi) + ms * math.log(dc.k / q)
    # (i / w)^m
    phase = np.exp(1j * ms * (math.pi / 2 - dc.omega.theta))
    return logabs, phase


def pair_with_density(spec: FourierSpectrum, dc: DensityCoeffs) -> complex:
    """sum_{|m| <= N} c_m G_m, accumulated in log scale."""
    if spec.m_max < dc.N:
        raise ValueError(f"spectrum has m_max={spec.m_max} < N={dc.N}")
    lo = spec.m_max - dc.N
    sl = slice(lo, lo + 2 * dc.N + 1)
    g = spec.coeffs[sl]
    nz = g != 0
    if not np.any(nz):
        return 0j
    logc, phase = log_density_coeffs(dc)
    expo = logc + spec.log_scale[sl]
    top = float(np.max(expo[nz] + np.log(np.abs(g[nz]))))
    with np.errstate(under="ignore"):
        total = np.sum(np.where(nz, phase * g * np.exp(np.where(nz, expo - top, 0.0)), 0))
    if top > 709:
        raise OverflowError(f"pairing magnitude exp({top:.1f}) exceeds the double range")
    return complex(total) * math.exp(top)


def nearfield_pairing(cauchy, value_and_gradient) -> complex:
    """Trapezoid value of int_{|x|=R} du/dnu v - dv/dnu u dsigma."""
    if len(cauchy.theta) < 128:
        raise ValueError("near-field pairing needs at least 128 samples")
    return cauchy.pairing(value_and_gradient)


def farfield_from_nearfield(k: float, pairing: complex) -> complex:
    """The far-field pairing equal to a Wronskian pairing on a circle."""
    return -far_field_constant(k) * pairing


# --- I/O ---------------------------------------------------------------------


def _cplx(v, where: str) -> complex:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise DatasetError(f"{where}: expected [re, im] pair, got {v!r}")
    try:
        return complex(float(v[0]), float(v[1]))
    except (TypeError, ValueError):
        raise DatasetError(f"{where}: non-numeric complex pair {v!r}") from None


def dataset_to_dict(ds: FarFieldDataset) -> dict:
    doc = {
        "version": SCHEMA_VERSION,
        "k": ds.k,
        "d": [float(ds.d[0]), float(ds.d[1])],
        "aperture": ds.aperture.to_dict(),
        "n": ds.n,
        "values": [[z.real, z.imag] for z in ds.values.tolist()],
    }
    if ds.metadata:
        doc["metadata"] = ds.metadata
    if ds.sources is not None:
        s = ds.sources
        doc["sources"] = {
            "points": s.points.tolist(),
            "monopoles": [[z.real, z.imag] for z in s.monopoles.tolist()],
            "dipoles": [[[z.real, z.imag] for z in row] for row in s.dipoles.tolist()],
        }
    return doc


def dataset_from_dict(doc: dict, where: str = "dataset") -> FarFieldDataset:
    if not isinstance(doc, dict):
        raise DatasetError(f"{where}: top level must be an object")
    for key in ("version", "k", "d", "aperture", "n", "values"):
        if key not in doc:
            raise DatasetError(f"{where}: missing field {key!r}")
    if doc["version"] != SCHEMA_VERSION:
        raise DatasetError(f"{where}: unsupported version {doc['version']!r} (expected {SCHEMA_VERSION})")
    try:
        k = float(doc["k"])
        d = np.array([float(x) for x in doc["d"]])
        n = int(doc["n"])
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: bad scalar field: {exc}") from None
    if d.shape != (2,):
        raise DatasetError(f"{where}: field 'd' must have two entries")
    ap = doc["aperture"]
    if not isinstance(ap, dict) or "type" not in ap:
        raise DatasetError(f"{where}: field 'aperture' needs a 'type'")
    aperture = Aperture(ap["type"], ap.get("theta1"), ap.get("theta2"))
    values = np.array([_cplx(v, f"{where}: values[{i}]") for i, v in enumerate(doc["values"])], dtype=complex)
    if len(values) != n:
        raise DatasetError(f"{where}: field 'n'={n} but {len(values)} values")
    sources = None
    if "sources" in doc:
        s = doc["sources"]
        try:
            pts = np.array(s["points"], dtype=float).reshape(-1, 2)
            mono = np.array([_cplx(v, f"{where}: sources.monopoles[{i}]") for i, v in enumerate(s["monopoles"])], complex)
            dip = np.array(
                [[_cplx(c, f"{where}: sources.dipoles[{i}]") for c in row] for i, row in enumerate(s["dipoles"])],
                complex,
            ).reshape(-1, 2)
            sources = SourceModel(k, pts, mono, dip)
        except (KeyError, ValueError) as exc:
            if isinstance(exc, DatasetError):
                raise
            raise DatasetError(f"{where}: malformed 'sources': {exc}") from None
    return FarFieldDataset(k, d, values, aperture, doc.get("metadata", {}), sources)


def write_dataset(ds: FarFieldDataset, path) -> None:
    with open(path, "w") as fh:
        json.dump(dataset_to_dict(ds), fh)
        fh.write("\n")


def read_dataset(path) -> FarFieldDataset:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return dataset_from_dict(doc, str(path))


def write_spectrum_csv(spec: FourierSpectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "Re", "Im"])
        for m, g in zip(spec.orders, spec.values):
            w.writerow([int(m), repr(float(g.real)), repr(float(g.imag))])
