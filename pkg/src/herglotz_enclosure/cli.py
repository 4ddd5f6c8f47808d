"""Command-line front end: forward data synthesis, reconstructions, self-test.

Every subcommand takes its parameters from flags, optionally seeded by a JSON
config file (``--config``) whose keys are the long flag names with
underscores. Unknown config keys are rejected before any computation.

Exit codes: 0 ok, 2 input error, 3 numerical failure, 4 self-test failure.
Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

THREADS_ENV = "HERGLOTZ_THREADS"
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_SELFTEST = 0, 2, 3, 4


class ConfigError(ValueError):
    """Bad config file or flag combination."""


def _version() -> str:
    from . import __version__

    return __version__


def _apply_threads() -> None:
    n = os.environ.get(THREADS_ENV)
    if not n:
        return
    if not n.isdigit() or int(n) < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {n!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = n


# --- parser ---------------------------------------------------------------------------


def _floats(n):
    def parse(text):
        try:
            vals = [float(x) for x in text.replace(",", " ").split()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}") from None
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
        return vals

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="herglotz-enclosure", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON file with default values for the flags")
        p.add_argument("--out", type=Path, help="output file or directory")

    f = sub.add_parser("forward", help="solve the forward problem and write a far-field dataset")
    common(f)
    f.add_argument("--scene", type=Path)
    f.add_argument("--k", type=float)
    f.add_argument("--d", type=_floats(2), help="incident direction 'dx dy'")
    f.add_argument("--n", type=int, help="number of far-field samples (default 512)")
    f.add_argument("--arc", type=_floats(2), help="restrict the aperture to the arc 'theta1 theta2'")
    f.add_argument("--resolution", type=int, help="panels (obstacle) or elements (crack) per edge")
    f.add_argument("--selfcheck", action="store_true", default=None, help="run a reciprocity check")

    e = sub.add_parser("enclose", help="support-function estimates and hull from full-aperture data")
    common(e)
    e.add_argument("--data", type=Path, nargs="+")
    e.add_argument("--beta", type=float)
    e.add_argument("--R", type=float, help="radius of a disc known to contain the scatterer")
    e.add_argument("--offset", type=float)
    e.add_argument("--n-min", type=int)
    e.add_argument("--n-max", type=int)
    e.add_argument("--n-step", type=int)
    e.add_argument("--directions", type=int)
    e.add_argument("--jitter", type=float, help="direction jitter in degrees")
    e.add_argument("--seed", type=int)
    e.add_argument("--model", choices=["log", "log+const"])
    e.add_argument("--classify", type=float, nargs="*", help="thresholds t for the decay test")

    a = sub.add_parser("aperture", help="limited-aperture support estimates")
    common(a)
    a.add_argument("--data", type=Path, nargs="+")
    a.add_argument("--R", type=float)
    a.add_argument("--taus", type=_floats(3), help="'tau_min tau_max count'")
    a.add_argument("--delta", type=float, help="absolute discrepancy (default: rel-delta * ||v||)")
    a.add_argument("--rel-delta", type=float)
    a.add_argument("--directions", type=int)
    a.add_argument("--jitter", type=float)
    a.add_argument("--seed", type=int)
    a.add_argument("--origin-outside", action="store_true", default=None, help="the origin is known not to lie in D")

    s = sub.add_parser("selftest", help="identity checks with measured values and bounds")
    s.add_argument("--out", type=Path)
    return parser


DEFAULTS = {
    "forward": {"n": 512, "arc": None, "resolution": None, "selfcheck": False, "d": [1.0, 0.0]},
    "enclose": {
        "beta": 0.5, "offset": 0.0, "n_min": 8, "n_max": 240, "n_step": 8, "directions": 16,
        "jitter": 3.0, "seed": 0, "model": "log", "classify": [],
    },
    "aperture": {
        "taus": [3.0, 12.0, 19], "delta": None, "rel_delta": 1e-3, "directions": 8, "jitter": 3.0,
        "seed": 0, "origin_outside": False,
    },
    "selftest": {},
}
REQUIRED = {"forward": ("scene", "k", "out"), "enclose": ("data", "R", "out"), "aperture": ("data", "R", "out"), "selftest": ()}


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    cmd = args.command
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = dict(DEFAULTS[cmd])
    path = getattr(args, "config", None)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        unknown = sorted(set(doc) - set(flags))
        if unknown:
            raise ConfigError(f"{path}: unknown keys {unknown}")
        cfg.update(doc)
    cfg.update({k: v for k, v in flags.items() if v is not None})
    for key in REQUIRED[cmd]:
        if cfg.get(key) is None:
            raise ConfigError(f"missing required parameter {key!r}")
    return {k: (str(v) if isinstance(v, Path) else [str(x) for x in v] if isinstance(v, list) and v and isinstance(v[0], Path) else v) for k, v in cfg.items()}


def config_hash(cmd: str, cfg: dict) -> str:
    """Hash of the resolved parameters; the output location is not part of a run's identity."""
    body = {k: v for k, v in cfg.items() if k != "out"}
    text = json.dumps({"command": cmd, **body}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _provenance(cmd, cfg) -> dict:
    return {"config_hash": config_hash(cmd, cfg), "version": _version()}


def _stamp(path: Path, prov: dict, comment: str = "#") -> None:
    """Prefix a text output with the provenance line."""
    text = path.read_text()
    if comment == "<!--":
        line = f"<!-- config_hash {prov['config_hash']} version {prov['version']} -->\n"
        head, _, rest = text.partition("\n")
        path.write_text(head + "\n" + line + rest if head.startswith("<?xml") else line + text)
    else:
        path.write_text(f"{comment} config_hash {prov['config_hash']} version {prov['version']}\n" + text)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- commands ----------------------------------------------------------------------------


def cmd_forward(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    import numpy as np

    from .farfield import Aperture, dataset_from_solution, dataset_to_dict
    from .forward import solve
    from .geometry import read_scene

    scene = read_scene(cfg["scene"])
    k = float(cfg["k"])
    d = np.asarray(cfg["d"], float)
    kw = {}
    if cfg["resolution"] is not None:
        kw["panels_per_edge" if scene.kind == "obstacle" else "elems_per_edge"] = int(cfg["resolution"])
    t0 = time.perf_counter()
    sol = solve(scene, k, d, **kw)
    aperture = Aperture() if cfg["arc"] is None else Aperture("arc", *cfg["arc"])
    ds = dataset_from_solution(sol, int(cfg["n"]), aperture)
    prov = _provenance("forward", cfg)
    doc = dataset_to_dict(ds)
    doc["metadata"] = {**doc.get("metadata", {}), **prov}
    diag = {"condition": sol.metadata.get("condition"), "method": sol.metadata.get("method"), "unknowns": sol.metadata.get("unknowns")}
    if cfg["selfcheck"]:
        diag["reciprocity_max_residual"] = _reciprocity(scene, k, d, sol, kw)
    out_path = Path(cfg["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out_path, doc)
    diag["seconds"] = round(time.perf_counter() - t0, 3)
    print(json.dumps(diag), file=out)
    return EXIT_OK


def _reciprocity(scene, k, d, sol, kw) -> float:
    """max |F(-phi; d) - F(-d; phi)| / max |F| over a few directions phi."""
    import numpy as np

    from .forward import solve

    d_ang = math.atan2(d[1], d[0])
    worst, scale = 0.0, float(np.abs(sol.sources.far_field(np.linspace(0, 2 * math.pi, 64, endpoint=False))).max())
    for phi in d_ang + np.array([0.7, 2.1, 4.0]):
        other = solve(scene, k, (math.cos(phi), math.sin(phi)), **kw)
        a = sol.sources.far_field(np.array([phi + math.pi]))[0]
        b = other.sources.far_field(np.array([d_ang + math.pi]))[0]
        worst = max(worst, abs(a - b) / scale)
    return worst


def _load_datasets(paths):
    from .farfield import read_dataset

    return [read_dataset(p) for p in paths]


def cmd_enclose(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    from .enclosure import (
        check_independent, classify_t, direction_grid, reconstruct_hull, write_hull_dat, write_hull_svg,
        write_trace_csv, write_trace_dat,
    )
    from .farfield import fourier_spectrum
    from .herglotz import ScheduleParams

    datasets = _load_datasets(cfg["data"])
    if len(datasets) > 2:
        raise ConfigError("at most two datasets (independent incident directions)")
    k = datasets[0].k
    if any(abs(ds.k - k) > 1e-12 * k for ds in datasets):
        raise ConfigError("datasets use different k")
    kinds = {ds.metadata.get("scene") for ds in datasets}
    if "crack" in kinds and len(datasets) != 2:
        raise ConfigError("crack data need two datasets with independent incident directions")
    directions = [ds.d for ds in datasets]
    if len(datasets) == 2:
        check_independent(*directions)
    Ns = list(range(int(cfg["n_min"]), int(cfg["n_max"]) + 1, int(cfg["n_step"])))
    if len(Ns) < 5:
        raise ConfigError("the N ladder needs at least 5 entries")
    p = ScheduleParams(float(cfg["beta"]), float(cfg["R"]), float(cfg["offset"]))
    spectra = [fourier_spectrum(ds, max(Ns)) for ds in datasets]
    omegas = direction_grid(int(cfg["directions"]), float(cfg["jitter"]), int(cfg["seed"]))
    result = reconstruct_hull(spectra, omegas, p, k, Ns, cfg["model"], directions=directions)
    prov = _provenance("enclose", cfg)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    ts = [float(t) for t in cfg["classify"]]
    for i, trace in enumerate(result.traces):
        trace = trace.with_classifications(ts)
        for suffix, writer in ((".csv", write_trace_csv), (".dat", write_trace_dat)):
            path = outdir / f"trace_{i:02d}{suffix}"
            writer(trace, path)
            _stamp(path, prov)
    write_hull_dat(result.hull.vertices, outdir / "hull.dat")
    _stamp(outdir / "hull.dat", prov)
    write_hull_svg(result.hull.vertices, outdir / "hull.svg", extent=float(cfg["R"]))
    _stamp(outdir / "hull.svg", prov, "<!--")
    doc = result.to_dict()
    doc["classifications"] = {
        f"{float(tr.omega.theta)!r}": {f"{t:g}": classify_t(tr, t) for t in ts} for tr in result.traces
    } if ts else {}
    doc["spectrum_routes"] = [s.route for s in spectra]
    doc.update(prov)
    _write_json(outdir / "result.json", doc)
    print(json.dumps({"directions": len(omegas), "skipped": len(result.skipped), "hull_vertices": len(result.hull.vertices)}), file=out)
    return EXIT_OK


def cmd_aperture(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    import numpy as np

    from .aperture import assemble_operator, limited_indicator, limited_support_estimate, min_norm_density
    from .enclosure import direction_grid
    from .farfield import fourier_spectrum, pair_with_density
    from .herglotz import density_coeffs

    datasets = _load_datasets(cfg["data"])
    k = datasets[0].k
    gamma = datasets[0].aperture
    for ds in datasets[1:]:
        if ds.aperture.to_dict() != gamma.to_dict() or ds.n != datasets[0].n or abs(ds.k - k) > 1e-12 * k:
            raise ConfigError("all datasets must share k, the arc and the sample count")
    if cfg["origin_outside"]:
        print("warning: origin outside D, the support estimates are not justified", file=sys.stderr)
    t_lo, t_hi, count = cfg["taus"]
    taus = np.linspace(float(t_lo), float(t_hi), int(count))
    R = float(cfg["R"])
    op = assemble_operator(gamma, k, R, n=datasets[0].n, tau_max=float(t_hi))
    omegas = direction_grid(int(cfg["directions"]), float(cfg["jitter"]), int(cfg["seed"]))
    rel = float(cfg["rel_delta"])
    estimates = []
    for omega in omegas:
        if cfg["delta"] is not None:
            dens = [min_norm_density(op, t, omega, delta=float(cfg["delta"])) for t in taus]
            from .enclosure import IndicatorRecord, IndicatorTrace, estimate_support

            recs = tuple(
                IndicatorRecord(i, float(t), float(sum(abs(limited_indicator(ds, m)) for ds in datasets)))
                for i, (t, m) in enumerate(zip(taus, dens))
            )
            trace = IndicatorTrace(omega, recs, "far-field limited aperture")
            h, diag = estimate_support(trace)
            diag["alphas"] = [m.alpha for m in dens]
            diag["deltas"] = [m.delta for m in dens]
        else:
            h, trace, diag = limited_support_estimate(datasets, op, omega, taus, rel_delta=rel)
        estimates.append({
            "theta": omega.theta, "h": h, "fit_residual": diag["fit_residual"],
            "alpha": diag["alphas"], "delta": diag["deltas"],
            "trace": [[r.tau, r.absI] for r in trace.records],
        })
    doc = {
        "gamma": gamma.to_dict(),
        "k": k,
        "R": R,
        "taus": [float(t) for t in taus],
        "delta_rule": "absolute" if cfg["delta"] is not None else f"{rel:g} * ||v||_H1 per tau",
        "origin_outside": bool(cfg["origin_outside"]),
        "estimates": estimates,
    }
    if gamma.full:
        # full circle: the same pairing is available through the truncated-series density
        tau = float(taus[0])
        spec = fourier_spectrum(datasets[0], 200)
        mnd = min_norm_density(op, tau, omegas[0], rel_delta=rel)
        a = limited_indicator(datasets[0], mnd)
        b = pair_with_density(spec, density_coeffs(160, tau, k, omegas[0]))
        doc["full_circle_crosscheck"] = {"tau": tau, "relative_gap": abs(a - b) / abs(b)}
    doc.update(_provenance("aperture", cfg))
    path = Path(cfg["out"])
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, doc)
    print(json.dumps({"directions": len(omegas), "mean_h": float(np.mean([e["h"] for e in estimates]))}), file=out)
    return EXIT_OK


def run_selftest(out=None) -> tuple[bool, list]:
    """Identity suites; each row is (name, measured, bound, passed)."""
    out = out or sys.stdout
    import numpy as np

    from .farfield import farfield_from_nearfield
    from .forward import CauchyData, SourceModel
    from .geometry import Direction
    from .herglotz import (
        FourierBessel, cgo_wave, density_coeffs, herglotz_wave, moment_residuals, truncation_certificate,
        weighted_log_E, ScheduleParams,
    )
    from .specfun import jn_array

    rng = np.random.default_rng(1)
    rows = []
    k, R = 1.0, 1.0
    omega = Direction(0.4)
    y = rng.uniform(-0.7, 0.7, size=(64, 2))

    # truncated density reproduces the probe wave within the certificate
    N, tau = 30, 4.0
    dc = density_coeffs(N, tau, k, omega)
    hv, _ = herglotz_wave(dc, y)
    cv, _ = cgo_wave(y, tau, k, omega)
    cert = truncation_certificate(N, tau, k, R)
    rows.append(("herglotz density vs probe wave", float(np.abs(hv - cv).max()), cert.bound_value))

    # Jacobi-Anger: the constant density 1/(2 pi) has Herglotz wave J_0(k|y|)
    fb = FourierBessel(k, 0, np.array([1.0 + 0j]))
    ja = np.abs(fb(y) - jn_array(0, k * np.hypot(*y.T))[0]).max()
    ang = 2 * math.pi * np.arange(256) / 256
    quad = np.exp(1j * k * (y @ np.stack([np.cos(ang), np.sin(ang)]))).mean(axis=1)
    rows.append(("Jacobi-Anger m=0", float(max(ja, np.abs(quad - fb(y)).max())), 1e-12))

    # moment equations of the density
    first, second = moment_residuals(density_coeffs(12, 3.0, k, omega), 12)
    rows.append(("moment equations", float(max(first.max(), second.max())), 1e-10))

    # near-field Wronskian pairing equals the far-field pairing
    pts = rng.uniform(-0.5, 0.5, size=(5, 2))
    src = SourceModel(k, pts, rng.normal(size=5) + 1j * rng.normal(size=5), rng.normal(size=(5, 2)) + 0j)
    th = 2 * math.pi * np.arange(256) / 256
    x = 1.5 * np.stack([np.cos(th), np.sin(th)], axis=1)
    u, gu = src.field(x)
    cauchy = CauchyData(1.5, th, u, np.einsum("pc,pc->p", gu, x) / 1.5)
    vg = lambda z: cgo_wave(z, 2.0, k, omega)
    a, b = farfield_from_nearfield(k, cauchy.pairing(vg)), src.pair(vg)
    rows.append(("near/far pairing identity", abs(a - b) / abs(b), 1e-10))

    # weighted truncation error decays along the schedule
    p = ScheduleParams(0.5, R)
    vals = [weighted_log_E(n, p, k) for n in (20, 40, 80, 160)]
    drop = max(b - a for a, b in zip(vals, vals[1:]))
    rows.append(("weighted certificate decay (max log increment)", float(drop), 0.0))

    # the decay row must be strictly negative; the others are upper bounds
    results = [(name, m, bnd, bool(m < bnd) if name.startswith("weighted") else bool(m <= bnd)) for name, m, bnd in rows]
    width = max(len(r[0]) for r in results)
    print(f"{'suite':<{width}}  {'measured':>12}  {'bound':>12}  status", file=out)
    for name, m, bnd, ok in results:
        print(f"{name:<{width}}  {m:12.3e}  {bnd:12.3e}  {'pass' if ok else 'FAIL'}", file=out)
    return all(r[3] for r in results), results


def cmd_selftest(cfg: dict, out=None) -> int:
    out = out or sys.stdout
    ok, rows = run_selftest(out)
    if cfg.get("out"):
        _write_json(Path(cfg["out"]), {
            "suites": [{"name": n, "measured": m, "bound": b, "passed": p} for n, m, b, p in rows],
            "passed": ok, "version": _version(),
        })
    return EXIT_OK if ok else EXIT_SELFTEST


COMMANDS = {"forward": cmd_forward, "enclose": cmd_enclose, "aperture": cmd_aperture, "selftest": cmd_selftest}


def _exit_code(exc: BaseException) -> int:
    from .aperture import ApertureInputError, MorozovError
    from .enclosure import EstimationError
    from .farfield import AliasingError, ApertureError, DatasetError
    from .forward import InputError, ResonanceError
    from .geometry import GeometryError

    if isinstance(exc, (ConfigError, GeometryError, DatasetError, ApertureError, AliasingError, InputError,
                        ApertureInputError, OSError)):
        return EXIT_INPUT
    if isinstance(exc, (ResonanceError, EstimationError, MorozovError, ArithmeticError, RuntimeError)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_INPUT
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads()
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON report
        code = _exit_code(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
