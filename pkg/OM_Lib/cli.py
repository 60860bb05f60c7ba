"""
Command-line entry point.

    om_lib simulate  [--config C] [--seed N] [--gain-over-gamma G] [--out DIR]
    om_lib spectrum  TRAJECTORY [--rbw-hz F | --averages N] [--normalize] [--out FILE]
    om_lib fit       SPECTRUM [--window LO HI] [--out FILE]
    om_lib scenario  NAME [--config C] [--seed N] [--threads N] [--out DIR] [--plot]
    om_lib oracle    --gamma-hz F --fm-khz F --g-over-gamma G [--temperature T] [--mass M]
                     [--out FILE]

Exit codes: 0 on success, 1 on invalid input or an unstable loop, 2 when a
computation fails (divergence, no peak, fit without convergence, too little data).
"""

import argparse
import os
import re
import sys
from dataclasses import replace

import numpy as np
import pandas as pd

import OM_Lib
from OM_Lib.config import load_config
from OM_Lib.exceptions import InstabilityError, NumericalError, ParameterError
from OM_Lib.models import (
    FeedbackConfig,
    OscillatorParams,
    ReadoutParams,
    closed_loop_psd,
    effective_q,
    effective_temperature,
    noise_reduction_r,
    required_power,
    to_single_sided_hz,
)
from OM_Lib.Simulation import LangevinSimulator, load_trajectory, save_trajectory
from OM_Lib.Spectral import (
    load_spectrum,
    lorentzian_fit,
    normalize_to_shot_noise,
    save_fit,
    save_spectrum,
    welch_psd,
)
from OM_Lib.Scenarios import SCENARIOS, RunManifest

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

_UNITS = {"": 1.0, "hz": 1.0, "khz": 1e3, "k": 1e3, "mhz": 1e6, "m": 1e6}
_TEMPERATURE_UNITS = {"": 1.0, "k": 1.0, "mk": 1e-3, "uk": 1e-6}
_MASS_UNITS = {"": 1.0, "kg": 1.0, "g": 1e-3, "mg": 1e-6, "ug": 1e-9}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


class UsageError(ParameterError):
    """
    Raised for an unknown subcommand, flag or malformed value
    """


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_frequency(text, default_scale=1.0):
    """
    Frequency with an optional unit suffix (hz, khz, k, K, mhz, M), in Hz

    :param text (str): Value such as "45", "45hz", "1858.9k" or "1858.9 kHz"
    :param default_scale (float): Scale of a bare number (1e3 for a flag in kHz)
    """
    match = _QUANTITY.match(str(text))
    if match is None:
        raise UsageError(f"cannot read a frequency from {text!r}")
    value, unit = float(match.group(1)), match.group(2)
    if unit == "":
        return value * default_scale
    if unit == "m":
        raise UsageError(f"ambiguous unit suffix {unit!r} in {text!r}, use M or mhz")
    scale = _UNITS.get(unit.lower())
    if scale is None:
        raise UsageError(f"unknown unit suffix {unit!r} in {text!r}")
    return value * scale


def parse_ratio(text):
    """
    Plain number, optionally followed by "gamma" or "x" (19, 19x, 19gamma)
    """
    match = re.match(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(x|gamma)?\s*$", str(text))
    if match is None:
        raise UsageError(f"cannot read a gain ratio from {text!r}")
    return float(match.group(1))


def _quantity(text, units, what):
    match = _QUANTITY.match(str(text))
    if match is None:
        raise UsageError(f"cannot read a {what} from {text!r}")
    value, unit = float(match.group(1)), match.group(2)
    scale = units.get(unit.lower())
    if scale is None:
        raise UsageError(f"unknown unit suffix {unit!r} in {text!r}")
    return value * scale


def parse_temperature(text):
    """
    Bath temperature with an optional unit suffix (K, mK, uK), in K

    :param text (str): Value such as "300", "300K" or "20 mK"
    """
    value = _quantity(text, _TEMPERATURE_UNITS, "temperature")
    if value < 0:
        raise UsageError(f"{text!r} must be a non-negative temperature")
    return value


def parse_mass(text):
    """
    Effective mass with an optional unit suffix (kg, g, mg, ug), in kg

    :param text (str): Value such as "1e-4", "0.1g" or "100 mg"
    """
    value = _quantity(text, _MASS_UNITS, "mass")
    if not value > 0:
        raise UsageError(f"{text!r} must be a positive mass")
    return value


def _positive_frequency(default_scale):
    def convert(text):
        value = parse_frequency(text, default_scale)
        if not value > 0:
            raise UsageError(f"{text!r} must be a positive frequency")
        return value

    return convert


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"{text!r} is not an integer")
    if value < 1:
        raise UsageError(f"{text!r} must be at least 1")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"{text!r} is not an integer seed")
    if not 0 <= value < 2 ** 64:
        raise UsageError(f"seed {text!r} must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = _Parser(prog="om_lib", description="Virtual optomechanics cold-damping experiment")
    parser.add_argument("--version", action="version", version=OM_Lib.__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add_config_flags(p):
        profile = p.add_mutually_exclusive_group()
        profile.add_argument("--config", default=None, help="Profile name or INI file")
        profile.add_argument("--scaled", dest="config", action="store_const", const="scaled")
        profile.add_argument("--physical", dest="config", action="store_const", const="physical")
        p.add_argument("--seed", type=_seed, default=None)
        p.add_argument("--threads", type=_positive_int, default=None)
        p.add_argument("--averages", type=_positive_int, default=None, help="Number of scans")
        p.add_argument("--rbw-hz", type=_positive_frequency(1.0), default=None)
        p.add_argument("--filter-center", type=_positive_frequency(1.0), default=None,
                       help="Band-pass center (Hz, or with a unit suffix)")
        p.add_argument("--filter-q", type=float, default=None)

    p = sub.add_parser("simulate", help="Simulate one trajectory")
    add_config_flags(p)
    p.add_argument("--gain-over-gamma", type=parse_ratio, default=0.0)
    p.add_argument("--record-force", action="store_true")
    p.add_argument("--format", choices=("txt", "npz"), default="npz")
    p.add_argument("--out", default="simulation")

    p = sub.add_parser("spectrum", help="Averaged PSD of a stored trajectory")
    p.add_argument("trajectory")
    p.add_argument("--rbw-hz", type=_positive_frequency(1.0), default=None)
    p.add_argument("--averages", type=_positive_int, default=None,
                   help="Split the record into this many scans (default: its scans)")
    p.add_argument("--normalize", action="store_true", help="Divide by the shot-noise floor")
    p.add_argument("--true-motion", action="store_true", help="Use the true displacement")
    p.add_argument("--out", default=None)

    p = sub.add_parser("fit", help="Lorentzian fit of a stored spectrum")
    p.add_argument("spectrum")
    p.add_argument("--window", nargs=2, type=_positive_frequency(1.0), default=None,
                   metavar=("LO", "HI"))
    p.add_argument("--out", default=None)

    p = sub.add_parser("scenario", help="Run a named scenario")
    p.add_argument("name", choices=sorted(SCENARIOS))
    add_config_flags(p)
    p.add_argument("--out", default=None)
    p.add_argument("--plot", action="store_true", help="Also write PNG figures")
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("oracle", help="Closed-loop predictions, no simulation")
    p.add_argument("--gamma-hz", type=_positive_frequency(1.0), required=True)
    p.add_argument("--fm-khz", type=_positive_frequency(1e3), required=True)
    p.add_argument("--g-over-gamma", type=parse_ratio, required=True)
    p.add_argument("--temperature", type=parse_temperature, default=300.0,
                   help="Bath temperature, K unless suffixed (300K, 20mK)")
    p.add_argument("--mass", type=parse_mass, default=None,
                   help="Effective mass, kg unless suffixed (0.1g, 100mg)")
    p.add_argument("--out", default=None, help="Write the PSD curves to this file")
    return parser


def resolve_config(args):
    """
    Configuration of a simulate or scenario command with its flags applied
    """
    cfg = load_config(args.config or "scaled")
    if args.filter_center is not None or args.filter_q is not None:
        center = None if args.filter_center is None else 2 * np.pi * args.filter_center
        cfg = cfg.with_filter(center, args.filter_q)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads is not None:
        cfg = cfg.with_threads(args.threads)
    if args.averages is not None:
        cfg = cfg.with_scans(args.averages)
    if args.rbw_hz is not None:
        cfg = cfg.with_rbw(args.rbw_hz)
    return cfg


def cmd_simulate(args):
    cfg = resolve_config(args)
    p = cfg.oscillator
    feedback = replace(cfg.feedback, gain=args.gain_over_gamma * p.gamma)
    manifest = RunManifest.create("simulate", cfg)
    os.makedirs(args.out, exist_ok=True)
    manifest.write(args.out)

    sim = replace(cfg.simulation, record_force=args.record_force)
    traj = LangevinSimulator(p, cfg.readout, feedback, cfg.actuator, sim).simulate()
    path = save_trajectory(traj, os.path.join(args.out, f"trajectory.{args.format}"))
    manifest.outputs = [os.path.basename(path)]
    manifest.write(args.out)
    print(f"wrote {path} ({len(traj)} samples, {traj.metadata['integration']} integration)")
    return EXIT_OK


def cmd_spectrum(args):
    traj = load_trajectory(args.trajectory)
    readout = ReadoutParams(**traj.metadata["readout"]) if "readout" in traj.metadata else None
    if args.true_motion or readout is None:
        series = traj.x_series
    else:
        series = traj.measured_displacement(readout)

    if args.rbw_hz is not None:
        s = welch_psd(series, traj.dt, rbw=args.rbw_hz)
    else:
        scans = args.averages or traj.metadata.get("simulation", {}).get("n_scans", 8)
        s = welch_psd(series, traj.dt, n_scans=scans)
    if readout is not None and readout.shot_noise_floor > 0:
        floor = float(to_single_sided_hz(readout.shot_noise_floor))
        s = replace(s, floor=floor)
        if args.normalize:
            s = normalize_to_shot_noise(s, floor, floor_included=not args.true_motion)
    elif args.normalize:
        raise ParameterError("the trajectory carries no shot-noise floor to normalize to")

    out = args.out or os.path.splitext(args.trajectory)[0] + "_spectrum.txt"
    save_spectrum(s, out)
    print(f"wrote {out} (rbw {s.rbw:.6g} Hz, {s.n_averages} averages)")
    return EXIT_OK


def cmd_fit(args):
    s = load_spectrum(args.spectrum)
    fit = lorentzian_fit(s, tuple(args.window) if args.window else None, strict=True)
    out = args.out or os.path.splitext(args.spectrum)[0] + "_fit.txt"
    save_fit(fit, out)
    print(
        f"center {fit.center:.9g} Hz | width {fit.width:.6g} Hz | Q {fit.quality_factor:.6g}"
        f" | area {fit.area:.6g} | background {fit.background:.6g}"
    )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_scenario(args):
    cfg = resolve_config(args)
    out = args.out or os.path.join("reports", args.name)
    scenario = SCENARIOS[args.name](cfg, verbose=args.verbose)
    os.makedirs(out, exist_ok=True)
    scenario.manifest.write(out)
    report = scenario.run()
    paths = report.save(out, plot=args.plot)
    for key, value in report.summary.items():
        print(f"{key}: {value:.6g}" if isinstance(value, float) else f"{key}: {value}")
    print(f"wrote {len(paths)} files to {out}")
    return EXIT_OK


def cmd_oracle(args):
    omega_m = 2 * np.pi * args.fm_khz
    gamma = 2 * np.pi * args.gamma_hz
    mass = args.mass if args.mass is not None else 1e-4
    p = OscillatorParams(mass, omega_m, gamma, args.temperature)
    gain = args.g_over_gamma * gamma
    r = noise_reduction_r(gamma, gain)
    rows = {
        "R": r,
        "T/T_fb": args.temperature / effective_temperature(p, gain)
        if args.temperature > 0
        else r,
        "Gamma_fb/Gamma": r,
        "Gamma_fb_hz": (gamma + gain) / (2 * np.pi),
        "Q": p.q,
        "Q_eff": effective_q(p, gain),
        "T_fb_K": effective_temperature(p, gain),
        "actuator_power_W": required_power(p, gain),
    }
    for key, value in rows.items():
        print(f"{key} = {value:.6g}")

    if args.out:
        fb = FeedbackConfig.from_ratio(p, args.g_over_gamma)
        half = 10.0 * max(gamma + gain, gamma)
        omega = np.linspace(max(omega_m - half, 0.0), omega_m + half, 2001)
        pd.DataFrame(
            {
                "freq_Hz": omega / (2 * np.pi),
                "psd_open": to_single_sided_hz(closed_loop_psd(p, fb.with_gain(0.0), omega)),
                "psd_closed": to_single_sided_hz(closed_loop_psd(p, fb, omega)),
            }
        ).to_csv(args.out, index=False, float_format="%.17g")
        print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "scenario": cmd_scenario,
    "oracle": cmd_oracle,
}


def main(argv=None):
    """
    Run one command; returns the exit code

    :param argv (list): Arguments without the program name, sys.argv[1:] when None
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as done:
        return done.code if isinstance(done.code, int) else EXIT_INVALID
    except (ParameterError, InstabilityError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as error:
        print(f"numerical failure: {type(error).__name__}: {error}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
