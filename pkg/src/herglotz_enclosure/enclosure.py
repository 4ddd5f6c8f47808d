"""Indicator sequences, support-function estimates and hull assembly.

For a density g_N with tau = tau(N), the pairing I_N = int F(-phi) g_N dsigma
grows like e^{tau h(omega)} up to an algebraic prefactor, so log|I_N|/tau
tends to the support function h(omega). Estimates extrapolate that ratio in
1/tau; the decay/divergence test for a threshold t looks at the sign of the
slope of log(e^{-tau t}|I_N|) against tau.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .farfield import FourierSpectrum, pair_with_density
from .geometry import Direction, GeometryError, HullResult, hull_from_support
from .herglotz import ScheduleParams, cgo_wave, density_coeffs, tau_schedule

UNDERFLOW = 1e-300
DEAD_BAND = 0.02


class EstimationError(RuntimeError):
    """Not enough usable indicator values to estimate a support value."""


@dataclass(frozen=True)
class IndicatorRecord:
    N: int
    tau: float
    absI: float

    @property
    def underflow(self) -> bool:
        return not self.absI > UNDERFLOW

    @property
    def log_over_tau(self) -> float:
        return math.log(self.absI) / self.tau if not self.underflow else -math.inf


@dataclass(frozen=True)
class IndicatorTrace:
    omega: Direction
    records: tuple
    mode: str = "far-field"
    classifications: dict = field(default_factory=dict)

    def __post_init__(self):
        taus = [r.tau for r in self.records]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("tau must increase strictly along a trace")

    @property
    def usable(self) -> list:
        return [r for r in self.records if not r.underflow]

    def with_classifications(self, ts) -> "IndicatorTrace":
        cls = dict(self.classifications)
        for t in ts:
            cls[float(t)] = classify_t(self, t)
        return IndicatorTrace(self.omega, self.records, self.mode, cls)


# --- indicators ----------------------------------------------------------------


def farfield_indicator(spec: FourierSpectrum, omega: Direction, N: int, p: ScheduleParams, k: float) -> complex:
    tau = tau_schedule(N, p)
    return pair_with_density(spec, density_coeffs(N, tau, k, omega))


def farfield_trace(spectra, omega: Direction, Ns, p: ScheduleParams, k: float) -> IndicatorTrace:
    """Trace of sum_j |I_N^{d_j}| over one or several spectra."""
    if isinstance(spectra, FourierSpectrum):
        spectra = [spectra]
    records = []
    for N in sorted(set(int(n) for n in Ns)):
        tau = tau_schedule(N, p)
        dc = density_coeffs(N, tau, k, omega)
        total = sum(abs(pair_with_density(s, dc)) for s in spectra)
        records.append(IndicatorRecord(N, tau, float(total)))
    mode = "far-field single-d" if len(spectra) == 1 else "far-field multi-d"
    return IndicatorTrace(omega, tuple(records), mode)


def nearfield_indicator(cauchy, omega: Direction, tau: float, t: float, k: float) -> float:
    """e^{-tau t} |int (du/dnu v - dv/dnu u) dsigma| with the exact probe wave v."""
    pairing = cauchy.pairing(lambda y: cgo_wave(y, tau, k, omega))
    return math.exp(-tau * t) * abs(pairing)


def nearfield_trace(cauchy_list, omega: Direction, taus, k: float) -> IndicatorTrace:
    records = []
    for i, tau in enumerate(sorted(taus)):
        total = sum(nearfield_indicator(c, omega, tau, 0.0, k) for c in cauchy_list)
        records.append(IndicatorRecord(i, float(tau), float(total)))
    return IndicatorTrace(omega, tuple(records), "near-field")


def check_independent(d1, d2) -> None:
    d1, d2 = np.asarray(d1, float), np.asarray(d2, float)
    if abs(d1[0] * d2[1] - d1[1] * d2[0]) < 1e-12:
        raise ValueError("incident directions must be linearly independent")


def multi_indicator(traces, directions) -> IndicatorTrace:
    """Sum of moduli, record by record, of traces for independent incident directions."""
    traces = list(traces)
    if len(traces) != 2 or len(directions) != 2:
        raise ValueError("the combined indicator uses exactly two incident directions")
    check_independent(*directions)
    a, b = traces
    if [r.N for r in a.records] != [r.N for r in b.records] or a.omega != b.omega:
        raise ValueError("traces must share omega and the N schedule")
    recs = tuple(IndicatorRecord(ra.N, ra.tau, ra.absI + rb.absI) for ra, rb in zip(a.records, b.records))
    mode = "near-field" if a.mode == "near-field" else "far-field multi-d"
    return IndicatorTrace(a.omega, recs, mode)


# --- estimation -----------------------------------------------------------------

FIT_MODELS = ("log", "log+const")


def _design(tau: np.ndarray, model: str) -> np.ndarray:
    cols = [np.ones_like(tau), np.log(tau) / tau]
    if model == "log+const":
        cols.append(1.0 / tau)
    return np.stack(cols, axis=1)


def estimate_support(trace: IndicatorTrace, model: str = "log"):
    """Extrapolated limit of log|I|/tau and diagnostics.

    ``model`` "log" fits a + b log(tau)/tau; "log+const" adds c/tau for the
    constant factor in front of the exponential.
    """
    if model not in FIT_MODELS:
        raise ValueError(f"unknown fit model {model!r}")
    recs = trace.usable
    if len(recs) < 5:
        raise EstimationError(f"only {len(recs)} usable indicator values (need 5)")
    tail = recs[len(recs) // 2 :]
    tau = np.array([r.tau for r in tail])
    y = np.array([r.log_over_tau for r in tail])
    A = _design(tau, model)
    if len(tail) < A.shape[1] + 1:
        A = A[:, :2]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    diag = {
        "raw_last": float(recs[-1].log_over_tau),
        "fit_residual": float(np.sqrt(np.mean(resid**2))),
        "log_coefficient": float(coef[1]),
        "const_coefficient": float(coef[2]) if len(coef) > 2 else 0.0,
        "n_fit": len(tail),
        "model": model if A.shape[1] == len(_design(tau[:1], model)[0]) else "log",
    }
    return float(coef[0]), diag


def classify_t(trace: IndicatorTrace, t: float, dead_band: float = DEAD_BAND) -> str:
    """'decays', 'diverges' or 'undecided' from the slope of log(e^{-tau t}|I|)."""
    recs = trace.usable
    if len(recs) < 5:
        return "undecided"
    tail = recs[len(recs) // 2 :]
    tau = np.array([r.tau for r in tail])
    y = np.array([math.log(r.absI) for r in tail]) - t * tau
    slope = np.polyfit(tau, y, 1)[0]
    if slope < -dead_band:
        return "decays"
    if slope > dead_band:
        return "diverges"
    return "undecided"


# --- hull ------------------------------------------------------------------------


def direction_grid(n: int = 16, jitter_deg: float = 3.0, seed: int = 0) -> list:
    """n uniform directions, each shifted by a seeded uniform jitter in [-jitter, jitter] degrees."""
    rng = np.random.default_rng(seed)
    base = 2 * math.pi * np.arange(n) / n
    shift = np.deg2rad(rng.uniform(-jitter_deg, jitter_deg, n)) if jitter_deg > 0 else np.zeros(n)
    return [Direction(float(a)) for a in base + shift]


@dataclass
class ReconstructionResult:
    estimates: list
    hull: HullResult
    params: dict
    skipped: list = field(default_factory=list)
    traces: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "estimates": [
                {"theta": e["omega"].theta, "h": e["h"], "slope": e["slope"], "raw_last": e["raw_last"], "fit_residual": e["fit_residual"]}
                for e in self.estimates
            ],
            "skipped": [{"theta": s["omega"].theta, "reason": s["reason"]} for s in self.skipped],
            "hull": self.hull.vertices.tolist(),
            "hull_empty": self.hull.empty,
            "params": self.params,
        }


def reconstruct_hull(
    spectra,
    omegas,
    p: ScheduleParams,
    k: float,
    Ns,
    model: str = "log",
    max_fit_residual: float = 0.05,
    directions=None,
) -> ReconstructionResult:
    """Support estimates on a direction grid, then the half-plane intersection.

    Several spectra (one per incident direction) are combined with the
    sum-of-moduli indicator; two independent directions are required for
    cracks by the caller.
    """
    if isinstance(spectra, FourierSpectrum):
        spectra = [spectra]
    if directions is not None and len(directions) == 2:
        check_independent(*directions)
    estimates, skipped, traces = [], [], []
    for omega in omegas:
        trace = farfield_trace(spectra, omega, Ns, p, k)
        traces.append(trace)
        try:
            h, diag = estimate_support(trace, model)
        except EstimationError as exc:
            skipped.append({"omega": omega, "reason": str(exc)})
            continue
        if not math.isfinite(h) or diag["fit_residual"] > max_fit_residual:
            skipped.append({"omega": omega, "reason": f"fit residual {diag['fit_residual']:.3g}"})
            continue
        estimates.append({"omega": omega, "h": h, "slope": diag["log_coefficient"], **diag})
    if len(estimates) < 3:
        raise EstimationError(f"only {len(estimates)} usable directions (need 3)")
    try:
        hull = hull_from_support([(e["omega"], e["h"]) for e in estimates], R=p.R)
    except GeometryError as exc:
        raise EstimationError(str(exc)) from None
    params = {
        "beta": p.beta,
        "R": p.R,
        "offset": p.offset,
        "k": k,
        "N": [int(n) for n in Ns],
        "model": model,
        "d": [list(map(float, d)) for d in directions] if directions is not None else None,
    }
    return ReconstructionResult(estimates, hull, params, skipped, traces)


# --- output ------------------------------------------------------------------------


def _label(t: float) -> str:
    return f"class_t={t:g}"


def write_trace_csv(trace: IndicatorTrace, path) -> None:
    ts = sorted(trace.classifications)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "tau", "absI", "logI_over_tau"] + [_label(t) for t in ts])
        for r in trace.records:
            lot = "underflow" if r.underflow else repr(float(r.log_over_tau))
            w.writerow([r.N, repr(float(r.tau)), repr(float(r.absI)), lot] + [trace.classifications[t] for t in ts])


def write_trace_dat(trace: IndicatorTrace, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# omega_theta {float(trace.omega.theta)!r} mode {trace.mode}\n# N tau absI logI_over_tau\n")
        for r in trace.usable:
            fh.write(f"{r.N} {float(r.tau)!r} {float(r.absI)!r} {float(r.log_over_tau)!r}\n")


def write_hull_dat(vertices: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("# x y (closed polygon)\n")
        if len(vertices):
            for x, y in np.vstack([vertices, vertices[:1]]):
                fh.write(f"{float(x)!r} {float(y)!r}\n")


def write_hull_svg(vertices: np.ndarray, path, extent: float = 2.0, size: int = 400) -> None:
    scale = size / (2 * extent)
    pts = " ".join(f"{(x + extent) * scale:.3f},{(extent - y) * scale:.3f}" for x, y in vertices)
    with open(path, "w") as fh:
        fh.write(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n'
            f'  <polygon points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>\n'
            "</svg>\n"
        )


def write_result_json(result: ReconstructionResult, path, extra: dict | None = None) -> None:
    doc = result.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
