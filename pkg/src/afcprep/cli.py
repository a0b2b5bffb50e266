"""Command-line front end.

Verb structure:

    afcprep synth ...
    afcprep bench ...
    afcprep comb {efficiency|optimize|decay} ...
    afcprep pump {simulate|bwlimit|lifetime} ...
    afcprep fit {decay|double-exp|comb} ...

Every command that writes a delimited table also renders a companion
figure next to it (same base name, .png) unless --no-figure is given.
Exit codes: 0 success, 2 configuration error, 3 validation error,
4 resource limit.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bench import BenchRecord, run_benchmark
from .comb import (
    CombSpec,
    DecayModel,
    SpectrumGrid,
    afc_efficiency,
    afc_efficiency_with_background,
    efficiency_decay,
    optimal_finesse,
)
from .errors import ConfigError, ResourceLimitError, ValidationError
from .fitting import (
    fit_afc_decay,
    fit_comb_parameters,
    fit_double_exponential,
    format_report,
    load_points_csv,
)
from .levels import load_level_system
from .pumping import (
    DEFAULT_CC_CENTERS,
    ClassEnsemble,
    RelaxationParams,
    bandwidth_limit_scan,
    cc_sequence,
    initial_ensemble,
    run_sequence,
    selected_class_mask,
    sp_sequence,
    spectrum_from_ensemble,
)
from .synthesis import (
    METHODS,
    PHASE_CONSTRUCTORS,
    SynthParams,
    select_phase_constructor,
    signal_metrics,
    synthesize,
)
from .waveio import write_table, write_waveform

__all__ = ["RunConfig", "build_parser", "main"]


@dataclass(frozen=True)
class RunConfig:
    """One command's validated parameter set.

    Path checks run before any computation starts: a missing input or
    an unwritable output directory must not surface after minutes of
    synthesis.
    """

    command: str
    options: dict

    @classmethod
    def from_args(cls, args, inputs=(), outputs=()):
        opts = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
        for name in inputs:
            path = opts.get(name)
            if path is not None and not os.path.isfile(path):
                raise ConfigError(f"input file not found: {path}")
        for name in outputs:
            path = opts.get(name)
            if path is not None:
                parent = os.path.dirname(os.path.abspath(path))
                if not os.path.isdir(parent):
                    raise ConfigError(f"output directory does not exist: {parent}")
        return cls(command=getattr(args, "command", "?"), options=opts)


def _figure_path(out: str) -> str:
    base, _ = os.path.splitext(out)
    return base + ".png"


def _parse_floats(text: str, flag: str) -> list[float]:
    """Comma list or colon range start:stop:step (stop exclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            return list(np.arange(start, stop, step))
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: cannot parse {text!r}") from None


def _parse_ints(text: str, flag: str) -> list[int]:
    return [int(round(v)) for v in _parse_floats(text, flag)]


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    RunConfig.from_args(args, outputs=("out",))
    method = "exact-envelope" if args.method == "exact" else args.method
    comb = CombSpec(
        delta=args.delta_hz, bandwidth=args.bandwidth_hz, finesse=args.finesse
    )
    constructor = args.phase_constructor or select_phase_constructor(comb.n_teeth)
    params = SynthParams(
        comb=comb,
        duration=args.duration_s,
        sample_rate=args.sample_rate_hz,
        method=method,
        phase_constructor=constructor,
        sign=args.sign,
    )
    signal = synthesize(params)
    metrics = signal_metrics(signal, comb)
    write_waveform(args.out, signal)
    table = args.metrics_out or args.out + ".metrics.csv"
    write_table(
        table,
        [
            "n_samples",
            "sample_rate_hz",
            "crest_factor",
            "rms_power_at_unit_peak",
            "oob_energy_fraction",
            "inband_ripple",
            "sigma_realized_hz",
            "peak_norm",
        ],
        [
            (
                signal.n_samples,
                params.sample_rate,
                metrics.crest_factor,
                metrics.rms_power,
                metrics.oob_energy_fraction,
                metrics.inband_ripple,
                signal.sigma_realized,
                signal.peak_norm,
            )
        ],
    )
    if not args.no_figure:
        from .plotting import save_waveform_figure

        save_waveform_figure(signal, comb, _figure_path(args.out))
    print(
        f"wrote {signal.n_samples} samples ({method}, {constructor}): "
        f"CF={metrics.crest_factor:.4f} rms={metrics.rms_power:.4e} "
        f"oob={metrics.oob_energy_fraction:.3e}"
    )
    return 0


# ---------------------------------------------------------------- bench


def cmd_bench(args) -> int:
    RunConfig.from_args(args, outputs=("out",))
    records = run_benchmark(
        _parse_ints(args.n_teeth, "--n-teeth"),
        methods=args.methods.split(",") if args.methods else METHODS,
        bandwidth=args.bandwidth_hz,
        finesse=args.finesse,
        duration=args.duration_s,
        sample_rate=args.sample_rate_hz,
        repeats=args.repeats,
    )
    write_table(args.out, list(BenchRecord.HEADER), [r.row() for r in records])
    if not args.no_figure:
        from .plotting import save_bench_figure

        save_bench_figure(records, _figure_path(args.out))
    for rec in records:
        flag = "" if rec.timing_stable else "  [timing unstable]"
        print(
            f"{rec.method:22s} N={rec.n_teeth:<6d} {rec.wall_time_s:9.4f} s "
            f"CF={rec.crest_factor:8.3f} rms={rec.rms_power_at_unit_peak:.4e}{flag}"
        )
    return 0


# ---------------------------------------------------------------- comb


def cmd_comb_efficiency(args) -> int:
    RunConfig.from_args(args, outputs=("out",))
    eta = float(afc_efficiency_with_background(args.d, args.finesse, args.d0))
    print(f"eta = {eta:.6g}")
    if args.out:
        write_table(
            args.out,
            ["d", "finesse", "d0", "eta"],
            [(args.d, args.finesse, args.d0, eta)],
        )
        if not args.no_figure:
            from .plotting import save_xy_figure

            grid = np.linspace(1.05, max(6.0, 2 * args.finesse), 400)
            save_xy_figure(
                grid,
                [afc_efficiency_with_background(args.d, grid, args.d0)],
                [f"d={args.d:g}, d0={args.d0:g}"],
                _figure_path(args.out),
                xlabel="finesse",
                ylabel="efficiency",
            )
    return 0


def cmd_comb_optimize(args) -> int:
    RunConfig.from_args(args, outputs=("out",))
    f_opt = float(optimal_finesse(args.d))
    eta = float(afc_efficiency(args.d, f_opt))
    eta_bg = float(afc_efficiency_with_background(args.d, f_opt, args.d0))
    print(f"F_opt = {f_opt:.4f}")
    print(f"eta = {eta:.4f} ({100 * eta:.1f}%)")
    if args.d0:
        print(f"eta with background d0={args.d0:g}: {eta_bg:.4f}")
    if args.out:
        write_table(
            args.out,
            ["d", "d0", "f_opt", "eta", "eta_with_background"],
            [(args.d, args.d0, f_opt, eta, eta_bg)],
        )
        if not args.no_figure:
            from .plotting import save_xy_figure

            grid = np.linspace(1.05, max(6.0, 2 * f_opt), 400)
            save_xy_figure(
                grid,
                [afc_efficiency(args.d, grid)],
                [f"d={args.d:g}"],
                _figure_path(args.out),
                xlabel="finesse",
                ylabel="efficiency",
            )
    return 0


def cmd_comb_decay(args) -> int:
    RunConfig.from_args(args, outputs=("out",))
    model = DecayModel(eta0=args.eta0, t2_afc=args.t2_s)
    eta = float(efficiency_decay(args.time_s, model, delta=args.delta_hz))
    print(f"eta({args.time_s:g} s) = {eta:.6g}")
    if args.out:
        times = np.linspace(0.0, 2.0 * args.time_s, 200)
        curve = efficiency_decay(times, model)
        write_table(
            args.out,
            ["storage_time_s", "eta"],
            list(zip(times.tolist(), curve.tolist())) + [(args.time_s, eta)],
        )
        if not args.no_figure:
            from .plotting import save_xy_figure

            save_xy_figure(
                times,
                [curve],
                [f"eta0={args.eta0:g}, T2={args.t2_s:g} s"],
                _figure_path(args.out),
                xlabel="storage time (s)",
                ylabel="efficiency",
            )
    return 0


# ---------------------------------------------------------------- pump


def _load_levels(path):
    return load_level_system(path) if path else load_level_system()


def cmd_pump_simulate(args) -> int:
    RunConfig.from_args(args, inputs=("levels",), outputs=("out",))
    levels = _load_levels(args.levels)
    ensemble = initial_ensemble(
        levels, grid_step=args.grid_step_mhz, span=args.span_mhz
    )
    cc_reps = args.cc_repetitions
    sp_reps = args.sp_repetitions
    if args.repetitions is not None:
        cc_reps = sp_reps = args.repetitions
    pumped = ensemble
    if cc_reps:
        pumped = run_sequence(
            pumped, cc_sequence(args.scan_width_mhz, repetitions=cc_reps), levels
        )
    if sp_reps:
        pumped = run_sequence(
            pumped, sp_sequence(args.scan_width_mhz, repetitions=sp_reps), levels
        )
    grid = np.arange(args.probe_min_mhz, args.probe_max_mhz, args.grid_step_mhz)
    selected = selected_class_mask(
        levels, pumped, DEFAULT_CC_CENTERS, args.scan_width_mhz
    )
    spec = spectrum_from_ensemble(
        pumped, levels, args.polarization, grid,
        subset=selected, line_fwhm=args.line_fwhm_mhz,
    )
    spec0 = spectrum_from_ensemble(
        ensemble, levels, args.polarization, grid, line_fwhm=args.line_fwhm_mhz
    )
    write_table(
        args.out,
        ["frequency_mhz", "od_pumped", "od_unpumped", "od_selected"],
        zip(grid.tolist(), spec.values.tolist(), spec0.values.tolist(),
            spec.subset_values.tolist()),
    )
    if not args.no_figure:
        from .plotting import save_spectrum_figure

        save_spectrum_figure(
            [spec0, spec], ["unpumped", "pumped"], _figure_path(args.out)
        )
    k0 = int(np.argmin(np.abs(grid)))
    print(
        f"OD at probe line: unpumped {spec0.values[k0]:.4f}, "
        f"pumped {spec.values[k0]:.4f}; peak OD {spec0.values.max():.4f}"
    )
    return 0


def cmd_pump_bwlimit(args) -> int:
    RunConfig.from_args(args, inputs=("levels",), outputs=("out",))
    levels = _load_levels(args.levels)
    scan = bandwidth_limit_scan(
        levels,
        bandwidths=_parse_floats(args.bandwidths_mhz, "--bandwidths-mhz"),
        grid_step=args.grid_step_mhz,
        span=args.span_mhz,
        cc_repetitions=args.cc_repetitions,
        sp_repetitions=args.sp_repetitions,
        threshold_rel=args.threshold_rel,
    )
    write_table(
        args.out,
        ["bandwidth_mhz", "parasitic_od", "parasitic_rel"],
        [(p.bandwidth, p.parasitic_od, p.parasitic_rel) for p in scan.points],
    )
    if not args.no_figure:
        from .plotting import save_scan_figure

        save_scan_figure(scan, _figure_path(args.out))
    if scan.knee is None:
        print(f"no knee: parasitic absorption stays below {scan.threshold_rel:g} "
              f"of the reference OD {scan.reference_od:.4f}")
    else:
        print(f"knee_mhz = {scan.knee:g} (reference OD {scan.reference_od:.4f})")
    return 0


def cmd_pump_lifetime(args) -> int:
    RunConfig.from_args(args, outputs=("out",))
    relax = RelaxationParams(
        rate_fast=args.rate_fast_hz,
        rate_slow=args.rate_slow_hz,
        fraction_fast=args.fraction_fast,
    )
    polarized = ClassEnsemble(
        detunings=np.array([0.0]),
        weights=np.array([1.0]),
        populations=np.array([[0.0, 0.0, 0.0, 1.0]]),
    )
    times = np.geomspace(args.t_min_s, args.t_max_s, args.n_times)
    trace = np.array(
        [
            args.amplitude
            * (apply_relaxation_trace(polarized, relax, t) - 0.25)
            / 0.75
            for t in times
        ]
    )
    if args.noise_rel > 0:
        rng = np.random.default_rng(args.seed)
        trace = trace * (1.0 + args.noise_rel * rng.standard_normal(trace.size))
    write_table(args.out, ["time_s", "d_rel"], zip(times.tolist(), trace.tolist()))
    points = np.column_stack((times, trace))
    result = fit_double_exponential(points)
    report = format_report(result)
    sys.stdout.write(report)
    if not args.no_figure:
        from .plotting import save_fit_figure

        mx = np.geomspace(times[0], times[-1], 400)
        a, b = result.parameters["a"], result.parameters["b"]
        tf, ts = result.parameters["t1_fast_s"], result.parameters["t1_slow_s"]
        save_fit_figure(
            points, mx, a * np.exp(-mx / tf) + b * np.exp(-mx / ts),
            _figure_path(args.out), logy=True,
        )
    return 0


def apply_relaxation_trace(ensemble, relax, t) -> float:
    """Population of the polarized state after relaxing for t seconds."""
    from .pumping import apply_relaxation

    return float(apply_relaxation(ensemble, relax, t).populations[0, 3])


# ---------------------------------------------------------------- fit


def _emit_fit(args, result, points, model_x, model_y, logy) -> int:
    report = format_report(result)
    sys.stdout.write(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report)
        if not args.no_figure and points is not None:
            from .plotting import save_fit_figure

            save_fit_figure(points, model_x, model_y, _figure_path(args.out), logy=logy)
    return 0


def cmd_fit_decay(args) -> int:
    RunConfig.from_args(args, inputs=("infile",), outputs=("out",))
    points = load_points_csv(args.infile)
    result = fit_afc_decay(points)
    t = np.linspace(points[:, 0].min(), points[:, 0].max(), 300)
    eta0, t2 = result.parameters["eta0"], result.parameters["t2_afc_s"]
    return _emit_fit(args, result, points, t, eta0 * np.exp(-4 * t / t2), True)


def cmd_fit_double_exp(args) -> int:
    RunConfig.from_args(args, inputs=("infile",), outputs=("out",))
    points = load_points_csv(args.infile)
    result = fit_double_exponential(points)
    t = np.geomspace(points[:, 0].min(), points[:, 0].max(), 400)
    a, b = result.parameters["a"], result.parameters["b"]
    tf, ts = result.parameters["t1_fast_s"], result.parameters["t1_slow_s"]
    return _emit_fit(
        args, result, points, t, a * np.exp(-t / tf) + b * np.exp(-t / ts), False
    )


def cmd_fit_comb(args) -> int:
    RunConfig.from_args(args, inputs=("infile",), outputs=("out",))
    points = load_points_csv(args.infile)
    spectrum = SpectrumGrid(frequencies=points[:, 0], values=points[:, 1])
    spec = CombSpec(delta=args.delta_hz, bandwidth=args.delta_hz, finesse=2.0)
    result = fit_comb_parameters(spectrum, spec)
    f = spectrum.frequencies
    width = args.delta_hz / result.parameters["finesse"]
    x = np.mod(f, args.delta_hz)
    x = np.minimum(x, args.delta_hz - x)
    model = np.where(x < width / 2, result.parameters["d"], 0.0)
    model += result.parameters["d0"]
    return _emit_fit(args, result, points, f, model, False)


# ---------------------------------------------------------------- parser


def _add_out_flags(p, required=True):
    p.add_argument("--out", required=required, default=None,
                   help="output table path (CSV)")
    p.add_argument("--no-figure", action="store_true",
                   help="skip the companion figure")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afcprep",
        description="AFC preparation toolkit: comb analytics, pump waveform "
        "synthesis, hole-burning simulation, and decay fitting.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize one pump waveform")
    p.add_argument("--delta-hz", type=float, required=True)
    p.add_argument("--bandwidth-hz", type=float, required=True)
    p.add_argument("--finesse", type=float, required=True)
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--sample-rate-hz", type=float, required=True)
    p.add_argument("--method", choices=tuple(METHODS) + ("exact",),
                   default="freq-domain")
    p.add_argument("--phase-constructor", choices=PHASE_CONSTRUCTORS, default=None,
                   help="default: picked from the tooth count")
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--out", required=True, help="waveform output path (raw I/Q)")
    p.add_argument("--metrics-out", default=None,
                   help="metrics table path (default: OUT.metrics.csv)")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="compare methods across tooth counts")
    p.add_argument("--n-teeth", default="25,250,2500,25000",
                   help="comma list or start:stop:step")
    p.add_argument("--methods", default=None,
                   help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--bandwidth-hz", type=float, default=250e6)
    p.add_argument("--finesse", type=float, default=2.5)
    p.add_argument("--duration-s", type=float, default=500e-6)
    p.add_argument("--sample-rate-hz", type=float, default=320e6)
    p.add_argument("--repeats", type=int, default=3)
    _add_out_flags(p)
    p.set_defaults(func=cmd_bench)

    comb = sub.add_parser("comb", help="echo-efficiency analytics")
    comb_sub = comb.add_subparsers(dest="subcommand", required=True)
    p = comb_sub.add_parser("efficiency", help="eta(d, F, d0)")
    p.add_argument("--d", type=float, required=True, help="peak optical depth")
    p.add_argument("--finesse", "--f", type=float, required=True)
    p.add_argument("--d0", type=float, default=0.0, help="background depth")
    _add_out_flags(p, required=False)
    p.set_defaults(func=cmd_comb_efficiency)
    p = comb_sub.add_parser("optimize", help="finesse maximizing eta at fixed d")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--d0", type=float, default=0.0)
    _add_out_flags(p, required=False)
    p.set_defaults(func=cmd_comb_optimize)
    p = comb_sub.add_parser("decay", help="eta after a storage time")
    p.add_argument("--eta0", type=float, required=True)
    p.add_argument("--t2-s", "--t2", dest="t2_s", type=float, required=True)
    p.add_argument("--time-s", "--time", dest="time_s", type=float, required=True)
    p.add_argument("--delta-hz", type=float, default=None,
                   help="cross-check: storage time must equal 1/delta")
    _add_out_flags(p, required=False)
    p.set_defaults(func=cmd_comb_decay)

    pump = sub.add_parser("pump", help="hole-burning simulation")
    pump_sub = pump.add_subparsers(dest="subcommand", required=True)

    def _pump_common(p):
        p.add_argument("--levels", default=None,
                       help="level-system JSON (default: packaged Yb:YSO site 2)")
        p.add_argument("--grid-step-mhz", type=float, default=1.0)
        p.add_argument("--span-mhz", type=float, default=6000.0)
        p.add_argument("--cc-repetitions", type=int, default=30)
        p.add_argument("--sp-repetitions", type=int, default=50)

    p = pump_sub.add_parser("simulate", help="spectra before/after CC and SP")
    _pump_common(p)
    p.add_argument("--scan-width-mhz", type=float, default=50.0)
    p.add_argument("--repetitions", type=int, default=None,
                   help="override both repetition counts (0 = unpumped)")
    p.add_argument("--polarization", default="D2")
    p.add_argument("--line-fwhm-mhz", type=float, default=None)
    p.add_argument("--probe-min-mhz", type=float, default=-200.0)
    p.add_argument("--probe-max-mhz", type=float, default=8200.0)
    _add_out_flags(p)
    p.set_defaults(func=cmd_pump_simulate)

    p = pump_sub.add_parser("bwlimit", help="parasitic absorption vs bandwidth")
    _pump_common(p)
    p.add_argument("--bandwidths-mhz", default="200:361:4")
    p.add_argument("--threshold-rel", type=float, default=0.10)
    _add_out_flags(p)
    p.set_defaults(func=cmd_pump_bwlimit)

    p = pump_sub.add_parser("lifetime", help="anti-hole relaxation trace + fit")
    p.add_argument("--rate-fast-hz", type=float, default=1.0 / 0.370)
    p.add_argument("--rate-slow-hz", type=float, default=1.0 / 4.7)
    p.add_argument("--fraction-fast", type=float, default=0.6)
    p.add_argument("--amplitude", type=float, default=1.0,
                   help="relative-depth scale of the trace")
    p.add_argument("--t-min-s", type=float, default=0.02)
    p.add_argument("--t-max-s", type=float, default=20.0)
    p.add_argument("--n-times", type=int, default=18)
    p.add_argument("--noise-rel", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    _add_out_flags(p)
    p.set_defaults(func=cmd_pump_lifetime)

    fit = sub.add_parser("fit", help="least-squares parameter recovery")
    fit_sub = fit.add_subparsers(dest="subcommand", required=True)

    def _fit_common(p):
        p.add_argument("--in", dest="infile", required=True,
                       help="two-column CSV (x, y), optional header")
        _add_out_flags(p, required=False)

    p = fit_sub.add_parser("decay", help="echo-efficiency decay")
    _fit_common(p)
    p.set_defaults(func=cmd_fit_decay)
    p = fit_sub.add_parser("double-exp", help="two-scale relaxation")
    _fit_common(p)
    p.set_defaults(func=cmd_fit_double_exp)
    p = fit_sub.add_parser("comb", help="comb shape readout from a spectrum")
    _fit_common(p)
    p.add_argument("--delta-hz", type=float, required=True,
                   help="tooth spacing, in the unit of the CSV frequency column")
    p.set_defaults(func=cmd_fit_comb)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return 3
    except ResourceLimitError as exc:
        print(f"error: resource: {exc}", file=sys.stderr)
        return 4
