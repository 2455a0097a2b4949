"""Command-line interface.

Subcommands: ``sample generate``, ``simulate scan``, ``simulate hbt``,
``correlate``, ``fit g2``, ``fit beam``, ``serve``.  Exit codes: 0 on
success, 2 on validation errors (bad flags, malformed inputs, infeasible
specs), 1 on unexpected runtime errors.  ``--json`` switches stdout to a
machine-readable report.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path



from . import __version__
from .actuation import ActuatorRangeError
from .analysis import FitError, classify_single_emitter, fit_beam_waist, fit_g2
from .correlator import (
    CorrelatorError,
    HistogramSpec,
    correlate,
    histogram_from_json,
    histogram_to_csv,
    histogram_to_json,
    normalize,
)
from .detection import TagStream, TagStreamError, read_tags, read_tags_csv
from .emitters import (
    SampleInfeasibleError,
    SampleSpec,
    generate_sample,
    sample_from_json,
    sample_to_json,
)
from .profiles import load_profile
from .scanning import ScanConfig, make_session, run_hbt, run_scan, save_scan
from .scenarios import DEMO_FAST_BRIGHTNESS, brighten_sample

VALIDATION_ERRORS = (
    ValueError,
    FileNotFoundError,
    TagStreamError,
    CorrelatorError,
    FitError,
    SampleInfeasibleError,
    ActuatorRangeError,
)


def _emit(args, human: str, payload: dict) -> None:
    if args.json:
        print(json.dumps({"schema": "photonbench/1", **payload}, indent=2, sort_keys=True))
    else:
        print(human)


def _load_tag_file(path: str) -> TagStream:
    if path.endswith(".csv"):
        return read_tags_csv(path)
    return read_tags(path)


def _load_sample(args):
    if getattr(args, "sample", None):
        field = sample_from_json(Path(args.sample).read_text())
    else:
        field = generate_sample(SampleSpec(rng_seed=args.seed))
    if getattr(args, "demo_fast", False):
        field = brighten_sample(field, DEMO_FAST_BRIGHTNESS)
    return field


def _write_histogram(hist, out: str) -> None:
    text = histogram_to_csv(hist) if out.endswith(".csv") else histogram_to_json(hist)
    Path(out).write_text(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_sample_generate(args) -> int:
    spec = SampleSpec(
        field_size_um=(args.field[0], args.field[1]),
        target_density_per_100um2=args.density,
        min_spacing_um=args.min_spacing,
        fraction_single=args.fraction_single,
        rng_seed=args.seed,
    )
    field = generate_sample(spec)
    text = sample_to_json(field)
    if args.out:
        Path(args.out).write_text(text)
        _emit(args, f"wrote {args.out}: {len(field.emitters)} emitters on {field.n_sites} sites "
                    f"(achieved density {field.achieved_density_per_100um2:.2f}/100um^2)",
              {"out": args.out, "n_emitters": len(field.emitters), "n_sites": field.n_sites,
               "achieved_density_per_100um2": field.achieved_density_per_100um2})
    else:
        print(text, end="")
    return 0


def cmd_simulate_scan(args) -> int:
    profile = load_profile(args.profile)
    sample = _load_sample(args)
    session = make_session(profile, sample, seed=args.seed)
    config = ScanConfig(
        extent_um=(args.extent[0], args.extent[1]),
        resolution=(args.resolution[0], args.resolution[1]),
        integration_time_ms=args.dwell_ms,
        laser_power_mw=args.power,
        rng_seed=args.seed,
        profile_name=profile.name,
    )
    img = run_scan(session, config)
    out_base = args.out
    for ext in (".json", ".csv"):
        if out_base.endswith(ext):
            out_base = out_base[: -len(ext)]
    csv_path, json_path = save_scan(img, out_base)
    _emit(args, f"scan complete: {img.counts.shape[1]}x{img.counts.shape[0]} px, "
                f"max {img.counts.max()} counts -> {csv_path}, {json_path}",
          {"out_csv": csv_path, "out_json": json_path,
           "max_counts": int(img.counts.max()), "complete": img.complete})
    return 0


def cmd_simulate_hbt(args) -> int:
    profile = load_profile(args.profile)
    sample = _load_sample(args)
    session = make_session(profile, sample, seed=args.seed)
    spec = HistogramSpec(bin_width_ps=args.bin_width_ps, bin_count=args.bins)
    hist = run_hbt(session, (args.x, args.y), args.duration, spec=spec, seed=args.seed)
    _write_histogram(hist, args.out)
    fit = fit_g2(hist) if hist.normalized is not None else None
    payload = {"out": args.out, "n_a": hist.n_a, "n_b": hist.n_b,
               "duration_s": hist.duration_ps / 1e12}
    human = f"hbt complete: {hist.n_a + hist.n_b} tags -> {args.out}"
    if fit is not None:
        payload["fit"] = fit.to_dict()
        human += (f"; g2(0) = {fit.g2_zero:.3f} +/- {fit.g2_zero_sigma:.3f} "
                  f"({classify_single_emitter(fit)})")
    _emit(args, human, payload)
    return 0


def cmd_correlate(args) -> int:
    a = _load_tag_file(args.a)
    b = _load_tag_file(args.b)
    duration = args.duration_ps or max(a.duration_ps, b.duration_ps)
    a = TagStream(channel=a.channel, timestamps=a.timestamps, duration_ps=duration)
    b = TagStream(channel=b.channel, timestamps=b.timestamps, duration_ps=duration)
    spec = HistogramSpec(bin_width_ps=args.bin_width_ps, bin_count=args.bins)
    hist = correlate(a, b, spec)
    if hist.n_a and hist.n_b and hist.duration_ps:
        hist = normalize(hist)
    _write_histogram(hist, args.out)
    _emit(args, f"correlated {hist.n_a} x {hist.n_b} tags, {int(hist.counts.sum())} pairs "
                f"in window -> {args.out}",
          {"out": args.out, "n_a": hist.n_a, "n_b": hist.n_b,
           "pairs_in_window": int(hist.counts.sum())})
    return 0


def cmd_fit_g2(args) -> int:
    hist = histogram_from_json(Path(args.infile).read_text())
    if hist.normalized is None:
        hist = normalize(hist)
    fit = fit_g2(hist)
    report = {"fit": fit.to_dict()}
    if args.out:
        Path(args.out).write_text(json.dumps({"schema": "photonbench/1", **report},
                                             indent=2, sort_keys=True) + "\n")
    _emit(args, f"g2(0) = {fit.g2_zero:.4f} +/- {fit.g2_zero_sigma:.4f}, "
                f"tau = {fit.tau_anti_ns:.2f} ns, verdict: {classify_single_emitter(fit)}",
          report)
    return 0


def cmd_fit_beam(args) -> int:
    rows = Path(args.infile).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "z_um,radius_um":
        raise FitError(f"{args.infile}: expected CSV header 'z_um,radius_um'")
    samples = [tuple(map(float, r.split(","))) for r in rows[1:] if r.strip()]
    fit = fit_beam_waist(samples, wavelength_nm=args.wavelength_nm)
    report = {"fit": {
        "w0_um": fit.w0_um, "z_focus_um": fit.z_focus_um,
        "w0_uncertainty_um": fit.w0_uncertainty_um,
        "residual_rms_um": fit.residual_rms_um, "converged": fit.converged,
    }}
    if args.out:
        Path(args.out).write_text(json.dumps({"schema": "photonbench/1", **report},
                                             indent=2, sort_keys=True) + "\n")
    _emit(args, f"w0 = {fit.w0_um:.3f} +/- {fit.w0_uncertainty_um:.3f} um "
                f"at z = {fit.z_focus_um:.2f} um", report)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(workspace=Path(args.workspace) if args.workspace else None)
    uvicorn.run(app, host=args.bind, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonbench",
        description="Virtual confocal single-photon microscope and correlation toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"photonbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, profile=True, out_required=True):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if profile:
            p.add_argument("--profile", default="reference",
                           help="preset name (reference|lowcost) or profile TOML path")
        p.add_argument("--out", required=out_required, help="output path")

    p_sample = sub.add_parser("sample", help="ground-truth sample operations")
    sample_sub = p_sample.add_subparsers(dest="sample_command", required=True)
    p_gen = sample_sub.add_parser("generate", help="generate a nanodiamond sample")
    common(p_gen, profile=False, out_required=False)
    p_gen.add_argument("--density", type=float, default=3.0, help="emitters per 100 um^2")
    p_gen.add_argument("--field", type=float, nargs=2, default=[20.0, 20.0],
                       metavar=("X_UM", "Y_UM"))
    p_gen.add_argument("--min-spacing", type=float, default=3.32)
    p_gen.add_argument("--fraction-single", type=float, default=0.8)
    p_gen.set_defaults(func=cmd_sample_generate)

    p_sim = sub.add_parser("simulate", help="run a virtual acquisition")
    sim_sub = p_sim.add_subparsers(dest="simulate_command", required=True)

    p_scan = sim_sub.add_parser("scan", help="2D confocal raster scan")
    common(p_scan)
    p_scan.add_argument("--sample", help="sample JSON (default: generate from --seed)")
    p_scan.add_argument("--extent", type=float, nargs=2, default=[20.0, 20.0],
                        metavar=("X_UM", "Y_UM"))
    p_scan.add_argument("--resolution", type=int, nargs=2, default=[100, 100],
                        metavar=("NX", "NY"))
    p_scan.add_argument("--dwell-ms", type=float, default=40.0)
    p_scan.add_argument("--power", type=float, default=None, help="laser power, mW")
    p_scan.add_argument("--demo-fast", action="store_true",
                        help="non-physical x20 emitter brightness for quick demos")
    p_scan.set_defaults(func=cmd_simulate_scan)

    p_hbt = sim_sub.add_parser("hbt", help="HBT antibunching acquisition at a position")
    common(p_hbt)
    p_hbt.add_argument("--sample", help="sample JSON (default: generate from --seed)")
    p_hbt.add_argument("--x", type=float, required=True, help="stage x, um")
    p_hbt.add_argument("--y", type=float, required=True, help="stage y, um")
    p_hbt.add_argument("--duration", type=float, required=True, help="seconds")
    p_hbt.add_argument("--bin-width-ps", type=int, default=200)
    p_hbt.add_argument("--bins", type=int, default=1000)
    p_hbt.add_argument("--demo-fast", action="store_true",
                       help="non-physical x20 emitter brightness for quick demos")
    p_hbt.set_defaults(func=cmd_simulate_hbt)

    p_corr = sub.add_parser("correlate", help="correlate two tag files")
    common(p_corr, seed=False, profile=False)
    p_corr.add_argument("--a", required=True, help="channel A tag file (.pbtg or .csv)")
    p_corr.add_argument("--b", required=True, help="channel B tag file (.pbtg or .csv)")
    p_corr.add_argument("--bin-width-ps", type=int, default=200)
    p_corr.add_argument("--bins", type=int, default=1000)
    p_corr.add_argument("--duration-ps", type=int, default=None,
                        help="acquisition span override (default: last tag)")
    p_corr.set_defaults(func=cmd_correlate)

    p_fit = sub.add_parser("fit", help="nonlinear least-squares fits")
    fit_sub = p_fit.add_subparsers(dest="fit_command", required=True)
    p_g2 = fit_sub.add_parser("g2", help="antibunching dip fit on a histogram JSON")
    common(p_g2, seed=False, profile=False, out_required=False)
    p_g2.add_argument("--in", dest="infile", required=True)
    p_g2.set_defaults(func=cmd_fit_g2)
    p_beam = fit_sub.add_parser("beam", help="beam waist w(z) fit on a z-scan CSV")
    common(p_beam, seed=False, profile=False, out_required=False)
    p_beam.add_argument("--in", dest="infile", required=True)
    p_beam.add_argument("--wavelength-nm", type=float, default=532.0)
    p_beam.set_defaults(func=cmd_fit_beam)

    p_serve = sub.add_parser("serve", help="run the local HTTP API + operator console")
    p_serve.add_argument("--port", type=int, default=8077)
    p_serve.add_argument("--bind", default="127.0.0.1")
    p_serve.add_argument("--workspace", default=None,
                         help="data directory (default: $PHOTONBENCH_WORKSPACE or ./photonbench-data)")
    p_serve.set_defaults(func=cmd_serve, json=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
