"""
Experiment configuration read from INI documents.

A configuration has one section per parameter bundle ([oscillator], [readout],
[feedback], [actuator], [simulation], [background]) plus [analysis] for the
scenario settings. Two profiles ship with the library: "scaled" (Omega_M = 1,
Q = 1000, the default) and "physical" (the 1858.9 kHz, Q ~ 4e4 mirror mode).
"""

import configparser
import io
import os
from dataclasses import dataclass, field, replace

import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models import BackgroundModel, FeedbackConfig, OscillatorParams, ReadoutParams
from OM_Lib.Simulation import ActuatorModel, SimConfig

SCALED_PROFILE = """
[oscillator]
mass_eff = 1.0
omega_m = 1.0
q = 1000
temperature = 300

[readout]
finesse = 37000
wavelength = 810e-9
floor_db = 40

[feedback]
loop_phase = 0.0
filter_center_ratio = 1.0
filter_q = 0.5
filtered = true

[actuator]
max_power = 0.5
saturate = false

[simulation]
steps_per_period = 64
n_samples = 524288
n_scans = 64
seed = 0
sensing = ideal
threads = 1

[background]
peak_fraction = 0.01
affected_by_feedback = false

[analysis]
cooling_gains = 0, 2, 6, 19
heating_gain = -0.98
sweep_gains = -0.9, -0.5, 0, 1, 2, 4, 9, 19, 39
oracle_gains = 0, 1, 4, 19
oracle_temperatures = 300
fit_half_width = 10
fit_max_fraction = 0.5
band_width = 400
oracle_band = 5
oracle_tolerance = 0.05
oracle_scans = 200
oracle_groups = 8
heating_scans = 16
heating_decay_times = 40
offres_center_ratio = 0.43036
offres_filter_q = 20
offres_depth = 1.2
"""

PHYSICAL_PROFILE = """
[oscillator]
mass_eff = 1e-4
f_m_hz = 1858.9e3
gamma_hz = 45
temperature = 300

[readout]
finesse = 37000
wavelength = 810e-9
floor_db = 40

[feedback]
loop_phase = 0.0
filter_center_ratio = 1.0
filter_q = 200
filtered = true

[actuator]
max_power = 0.5
saturate = true

[simulation]
steps_per_period = 64
n_samples = 16777216
n_scans = 200
seed = 0
sensing = sensor
threads = 1

[background]
peak_fraction = 0.01
affected_by_feedback = false

[analysis]
cooling_gains = 0, 2, 6, 19
heating_gain = -0.98
sweep_gains = -0.9, -0.5, 0, 1, 2, 4, 9, 19, 39
oracle_gains = 0, 1, 4, 19
oracle_temperatures = 300
fit_half_width = 10
fit_max_fraction = 0.5
band_width = 400
oracle_band = 5
oracle_tolerance = 0.05
oracle_scans = 200
oracle_groups = 8
heating_scans = 16
heating_decay_times = 40
offres_center_ratio = 0.43036
offres_filter_q = 200
offres_depth = 1.2
"""

PROFILES = {
    "scaled": SCALED_PROFILE,
    "physical": PHYSICAL_PROFILE,
    "defaults": SCALED_PROFILE,
}


_ALTERNATIVES = (
    ("oscillator", ("omega_m", "f_m_hz")),
    ("oscillator", ("gamma", "gamma_hz", "q")),
    ("readout", ("shot_noise_floor", "floor_db")),
    ("feedback", ("filter_center", "filter_center_ratio")),
    ("simulation", ("dt", "steps_per_period")),
    ("background", ("level", "peak_fraction")),
)


def _floats(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


@dataclass(frozen=True)
class AnalysisSettings:
    """
    Scenario settings

    :param cooling_gains (tuple): g/Gamma of the cooling spectra, 0 first
    :param heating_gain (float): g/Gamma of the heating run, in (-1, 0)
    :param sweep_gains (tuple): g/Gamma of the gain sweep
    :param oracle_gains (tuple): g/Gamma of the oracle grid
    :param oracle_temperatures (tuple): Temperatures of the oracle grid in K
    :param fit_half_width (float): Fit window half-width in closed-loop linewidths
    :param fit_max_fraction (float): Largest fit window half-width as a fraction of the
        resonance frequency
    :param band_width (float): Full band of the variance estimator in open-loop linewidths
    :param oracle_band (float): Oracle comparison half-band in closed-loop linewidths
    :param oracle_tolerance (float): Relative deviation flagged by the oracle check
    :param oracle_scans (int): Scans averaged per oracle point
    :param oracle_groups (int): Sub-bands of the oracle comparison, each held to oracle_tolerance
    :param heating_scans (int): Scans averaged in the heating spectrum
    :param heating_decay_times (float): Shortest scan in closed-loop decay times 1/Gamma_fb
    :param offres_center_ratio (float): Off-resonance filter center over Omega_M
    :param offres_filter_q (float): Quality factor of the off-resonance filter
    :param offres_depth (float): Loop strength g Omega_c/|Omega_M^2 - Omega_c^2| of the
        off-resonance run
    """

    cooling_gains: tuple = (0.0, 2.0, 6.0, 19.0)
    heating_gain: float = -0.98
    sweep_gains: tuple = (-0.9, -0.5, 0.0, 1.0, 2.0, 4.0, 9.0, 19.0, 39.0)
    oracle_gains: tuple = (0.0, 1.0, 4.0, 19.0)
    oracle_temperatures: tuple = (300.0,)
    fit_half_width: float = 10.0
    fit_max_fraction: float = 0.5
    band_width: float = 400.0
    oracle_band: float = 5.0
    oracle_tolerance: float = 0.05
    oracle_scans: int = 200
    oracle_groups: int = 8
    heating_scans: int = 16
    heating_decay_times: float = 40.0
    offres_center_ratio: float = 800.0 / 1858.9
    offres_filter_q: float = 20.0
    offres_depth: float = 1.2

    def __post_init__(self):
        if not -1.0 < self.heating_gain < 0.0:
            raise ParameterError(
                f"heating_gain must lie in (-1, 0), got {self.heating_gain}"
            )
        if not 0 < self.fit_max_fraction < 1:
            raise ParameterError(
                f"fit_max_fraction must lie in (0, 1), got {self.fit_max_fraction}"
            )
        if not 0 < self.offres_center_ratio < 1:
            raise ParameterError(
                f"offres_center_ratio must lie in (0, 1), got {self.offres_center_ratio}"
            )
        for name in ("fit_half_width", "band_width", "oracle_band", "oracle_tolerance"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Fully resolved parameter bundles of an experiment

    :param oscillator (OscillatorParams): Mechanical mode
    :param readout (ReadoutParams): Cavity readout
    :param feedback (FeedbackConfig): Loop template; scenarios set its gain
    :param actuator (ActuatorModel): Radiation-pressure actuator
    :param simulation (SimConfig): Time grid, scans and seed
    :param background (BackgroundModel): Background used where a scenario asks for one
    :param analysis (AnalysisSettings): Scenario settings
    :param profile (str): Name of the profile or file it was read from
    """

    oscillator: OscillatorParams
    readout: ReadoutParams
    feedback: FeedbackConfig
    actuator: ActuatorModel
    simulation: SimConfig
    background: BackgroundModel
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    profile: str = "scaled"

    def with_seed(self, seed):
        return replace(self, simulation=replace(self.simulation, seed=int(seed)))

    def with_threads(self, threads):
        return replace(self, simulation=replace(self.simulation, threads=int(threads)))

    def with_scans(self, n_scans):
        return replace(self, simulation=replace(self.simulation, n_scans=int(n_scans)))

    def with_rbw(self, rbw):
        """
        Scan length giving a Hann-window resolution bandwidth `rbw` in Hz
        """
        if not rbw > 0:
            raise ParameterError(f"rbw must be positive, got {rbw}")
        n_samples = int(round(1.5 / (rbw * self.simulation.dt)))
        return replace(self, simulation=replace(self.simulation, n_samples=n_samples))

    def with_filter(self, center=None, q=None):
        kwargs = {}
        if center is not None:
            kwargs["filter_center"] = float(center)
        if q is not None:
            kwargs["filter_q"] = float(q)
        return replace(self, feedback=replace(self.feedback, **kwargs))


def _oscillator(section):
    temperature = section.getfloat("temperature", 300.0)
    mass = section.getfloat("mass_eff")
    if "omega_m" in section:
        omega_m = section.getfloat("omega_m")
    elif "f_m_hz" in section:
        omega_m = 2 * np.pi * section.getfloat("f_m_hz")
    else:
        raise ParameterError("[oscillator] needs omega_m or f_m_hz")
    if "gamma" in section:
        gamma = section.getfloat("gamma")
    elif "gamma_hz" in section:
        gamma = 2 * np.pi * section.getfloat("gamma_hz")
    elif "q" in section:
        gamma = omega_m / section.getfloat("q")
    else:
        raise ParameterError("[oscillator] needs gamma, gamma_hz or q")
    return OscillatorParams(mass, omega_m, gamma, temperature)


def _readout(section, p):
    finesse = section.getfloat("finesse", 37000.0)
    wavelength = section.getfloat("wavelength", 810e-9)
    if "shot_noise_floor" in section:
        return ReadoutParams(finesse, wavelength, section.getfloat("shot_noise_floor"))
    if "floor_db" in section:
        return ReadoutParams.with_floor_below_peak(
            p, section.getfloat("floor_db"), finesse, wavelength
        )
    return ReadoutParams(finesse, wavelength)


def _feedback(section, p, max_power):
    if "filter_center" in section:
        center = section.getfloat("filter_center")
    else:
        center = section.getfloat("filter_center_ratio", 1.0) * p.omega_m
    return FeedbackConfig(
        gain=p.gamma * section.getfloat("g_over_gamma", 0.0),
        loop_phase=section.getfloat("loop_phase", 0.0),
        filter_center=center,
        filter_q=section.getfloat("filter_q", 200.0),
        actuator_max_power=max_power,
        filtered=section.getboolean("filtered", True),
    )


def _simulation(section, p):
    kwargs = dict(
        n_samples=section.getint("n_samples"),
        n_scans=section.getint("n_scans", 1),
        seed=section.getint("seed", 0),
        record_force=section.getboolean("record_force", False),
        sensing=section.get("sensing", "sensor"),
        threads=section.getint("threads", 1),
    )
    if "burn_in" in section:
        kwargs["burn_in"] = section.getint("burn_in")
    if "dt" in section:
        return SimConfig(dt=section.getfloat("dt"), **kwargs)
    return SimConfig.for_oscillator(
        p, steps_per_period=section.getfloat("steps_per_period", 64), **kwargs
    )


def _background(section, p):
    affected = section.getboolean("affected_by_feedback", False)
    if "level" in section:
        return BackgroundModel(section.getfloat("level"), affected)
    return BackgroundModel.from_peak_fraction(p, section.getfloat("peak_fraction", 0.0), affected)


def _analysis(section):
    defaults = AnalysisSettings()
    kwargs = {}
    for name, value in vars(defaults).items():
        if name not in section:
            continue
        if isinstance(value, tuple):
            kwargs[name] = _floats(section[name])
        elif isinstance(value, int):
            kwargs[name] = section.getint(name)
        else:
            kwargs[name] = section.getfloat(name)
    return AnalysisSettings(**kwargs)


def read_parser(parser, profile="custom"):
    """
    Resolve the parameter bundles held by a ConfigParser
    """
    for name in ("oscillator", "simulation"):
        if not parser.has_section(name):
            raise ParameterError(f"configuration lacks the [{name}] section")
    for name in ("readout", "feedback", "actuator", "background", "analysis"):
        if not parser.has_section(name):
            parser.add_section(name)

    try:
        p = _oscillator(parser["oscillator"])
        act = parser["actuator"]
        max_power = act.getfloat("max_power", 0.5)
        actuator = ActuatorModel(
            max_power=max_power,
            bias_power=act.getfloat("bias_power") if "bias_power" in act else None,
            saturate=act.getboolean("saturate", True),
        )
        return ExperimentConfig(
            oscillator=p,
            readout=_readout(parser["readout"], p),
            feedback=_feedback(parser["feedback"], p, max_power),
            actuator=actuator,
            simulation=_simulation(parser["simulation"], p),
            background=_background(parser["background"], p),
            analysis=_analysis(parser["analysis"]),
            profile=profile,
        )
    except (KeyError, TypeError) as error:
        raise ParameterError(f"incomplete configuration: {error}") from error
    except ValueError as error:
        if isinstance(error, ParameterError):
            raise
        raise ParameterError(f"invalid configuration value: {error}") from error


def load_config(source="scaled"):
    """
    Read a configuration from a profile name ("scaled", "physical", "defaults")
    or an INI file; values missing from the file are taken from the scaled profile

    :param source (str): Profile name or path
    :returns: ExperimentConfig
    """
    parser = configparser.ConfigParser()
    if source in PROFILES:
        parser.read_string(PROFILES[source])
        return read_parser(parser, "scaled" if source == "defaults" else source)
    if not os.path.isfile(source):
        raise ParameterError(
            f"{source!r} is neither a profile ({', '.join(PROFILES)}) nor a file"
        )
    parser.read_string(SCALED_PROFILE)
    user = configparser.ConfigParser()
    user.read(source)
    # alternative spellings of one quantity must not mix with the profile's
    for section, group in _ALTERNATIVES:
        if user.has_section(section) and any(user.has_option(section, k) for k in group):
            for key in group:
                parser.remove_option(section, key)
    parser.read(source)
    return read_parser(parser, source)


def _num(value):
    return repr(float(value))


def _analysis_value(value):
    if isinstance(value, tuple):
        return ", ".join(_num(v) for v in value)
    if isinstance(value, int):
        return str(value)
    return _num(value)


def to_parser(cfg):
    """
    ConfigParser holding the fully resolved values of a configuration
    """
    parser = configparser.ConfigParser()
    p, fb, sim, analysis = cfg.oscillator, cfg.feedback, cfg.simulation, cfg.analysis
    parser["oscillator"] = {
        "mass_eff": _num(p.mass_eff),
        "omega_m": _num(p.omega_m),
        "gamma": _num(p.gamma),
        "temperature": _num(p.temperature),
    }
    parser["readout"] = {
        "finesse": _num(cfg.readout.finesse),
        "wavelength": _num(cfg.readout.wavelength),
        "shot_noise_floor": _num(cfg.readout.shot_noise_floor),
    }
    parser["feedback"] = {
        "g_over_gamma": _num(fb.gain / p.gamma),
        "loop_phase": _num(fb.loop_phase),
        "filter_center": _num(fb.filter_center),
        "filter_q": _num(fb.filter_q),
        "filtered": str(fb.filtered).lower(),
    }
    parser["actuator"] = {
        "max_power": _num(cfg.actuator.max_power),
        "bias_power": _num(cfg.actuator.bias_power),
        "saturate": str(cfg.actuator.saturate).lower(),
    }
    simulation = {
        "dt": _num(sim.dt),
        "n_samples": str(sim.n_samples),
        "n_scans": str(sim.n_scans),
        "seed": str(sim.seed),
        "record_force": str(sim.record_force).lower(),
        "sensing": sim.sensing,
        "threads": str(sim.threads),
    }
    if sim.burn_in is not None:
        simulation["burn_in"] = str(sim.burn_in)
    parser["simulation"] = simulation
    parser["background"] = {
        "level": _num(cfg.background.level),
        "affected_by_feedback": str(cfg.background.affected_by_feedback).lower(),
    }
    parser["analysis"] = {
        name: _analysis_value(value) for name, value in vars(analysis).items()
    }
    return parser


def dump_config(cfg, path=None):
    """
    Write the resolved configuration as INI; returns the text

    :param cfg (ExperimentConfig): Configuration to write
    :param path (str): Output file, text only when None
    """
    buffer = io.StringIO()
    to_parser(cfg).write(buffer)
    text = buffer.getvalue()
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
