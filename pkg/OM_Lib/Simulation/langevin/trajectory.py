import json
import os
from dataclasses import dataclass, field

import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models import phase_to_displacement

SENSING_MODES = ("sensor", "ideal")


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


@dataclass(frozen=True)
class SimConfig:
    """
    Time grid and noise streams of one simulation run.

    The run is one continuous trajectory cut into `n_scans` records of
    `n_samples` samples, the way an analyzer averages consecutive scans.

    :param dt (float): Time step in s
    :param n_samples (int): Samples per scan
    :param n_scans (int): Number of scans
    :param seed (int): Seed of every noise stream of the run
    :param record_force (bool): Also record the actuator force and the loop input
    :param sensing (str): "sensor" feeds the shot-noise-limited record to the loop,
        "ideal" feeds the true displacement
    :param burn_in (int): Samples discarded before the first scan; None picks five
        closed-loop decay times (zero when starting from a coherent excitation)
    :param x0 (float): Initial displacement in m
    :param v0 (float): Initial velocity in m/s
    :param threads (int): Workers drawing the noise of consecutive scans
    """

    dt: float
    n_samples: int
    n_scans: int = 1
    seed: int = 0
    record_force: bool = False
    sensing: str = "sensor"
    burn_in: int = None
    x0: float = 0.0
    v0: float = 0.0
    threads: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if int(self.n_samples) < 2:
            raise ParameterError(f"n_samples must be at least 2, got {self.n_samples}")
        if int(self.n_scans) < 1:
            raise ParameterError(f"n_scans must be at least 1, got {self.n_scans}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.sensing not in SENSING_MODES:
            raise ParameterError(
                f"sensing must be one of {SENSING_MODES}, got {self.sensing!r}"
            )
        if self.burn_in is not None and int(self.burn_in) < 0:
            raise ParameterError(f"burn_in must be non-negative, got {self.burn_in}")
        if int(self.threads) < 1:
            raise ParameterError(f"threads must be at least 1, got {self.threads}")

    @classmethod
    def for_oscillator(cls, p, n_samples, n_scans=1, steps_per_period=64, **kwargs):
        """
        Config whose step resolves the mode with `steps_per_period` samples per period
        (64 keeps dt * Omega_M below 0.1)
        """
        dt = 2 * np.pi / (steps_per_period * p.omega_m)
        return cls(dt=dt, n_samples=n_samples, n_scans=n_scans, **kwargs)

    @property
    def total_samples(self):
        return int(self.n_samples) * int(self.n_scans)

    @property
    def coherent_start(self):
        return self.x0 != 0.0 or self.v0 != 0.0

    def check(self, p):
        """
        Raise if the step does not resolve the mode (dt * Omega_M must stay below 0.1)
        """
        if self.dt * p.omega_m >= 0.1:
            raise ParameterError(
                f"dt * omega_m = {self.dt * p.omega_m:.3g} must be below 0.1"
            )

    def resolves(self, gamma_fb):
        """
        True if one scan lasts at least 10 closed-loop decay times 1/gamma_fb
        """
        return self.n_samples * self.dt >= 10.0 / gamma_fb


@dataclass
class OscState:
    """
    State of the discrete closed loop between two steps

    :param x (float): Displacement in m
    :param v (float): Velocity in m/s
    :param filter_state (tuple): The two delay registers of the band-pass section
    :param y_prev (float): Previous band-pass output
    """

    x: float = 0.0
    v: float = 0.0
    filter_state: tuple = (0.0, 0.0)
    y_prev: float = 0.0

    def is_finite(self):
        return bool(
            np.isfinite(self.x)
            and np.isfinite(self.v)
            and np.all(np.isfinite(self.filter_state))
            and np.isfinite(self.y_prev)
        )


@dataclass
class Trajectory:
    """
    Simulated records sampled every dt

    :param x_series (np.ndarray): True displacement of the mode in m
    :param phase_series (np.ndarray): Sensor output in rad, shot noise and background included
    :param force_series (np.ndarray): Dynamic actuator force in N, or None
    :param dt (float): Sampling step in s
    :param metadata (dict): Parameters, seed and conventions of the run
    :param loop_series (np.ndarray): Displacement record the loop sensed, or None
    """

    x_series: np.ndarray
    phase_series: np.ndarray
    force_series: np.ndarray = None
    dt: float = 1.0
    metadata: dict = field(default_factory=dict)
    loop_series: np.ndarray = None

    def __post_init__(self):
        self.x_series = np.asarray(self.x_series, dtype=float)
        self.phase_series = np.asarray(self.phase_series, dtype=float)
        if len(self.phase_series) != len(self.x_series):
            raise ParameterError("x_series and phase_series must have equal length")
        for name in ("force_series", "loop_series"):
            series = getattr(self, name)
            if series is None:
                continue
            series = np.asarray(series, dtype=float)
            if len(series) != len(self.x_series):
                raise ParameterError(f"{name} must have the length of x_series")
            setattr(self, name, series)

    def __len__(self):
        return len(self.x_series)

    @property
    def time(self):
        return np.arange(len(self)) * self.dt

    def measured_displacement(self, readout):
        """
        Sensor record converted back to displacement with the cavity gain 8 F/lambda
        """
        return phase_to_displacement(readout, self.phase_series)


def save_trajectory(traj, path):
    """
    Write a trajectory as columnar binary (.npz) or delimited text (any other suffix)
    with a '#' header carrying the metadata

    :param traj (Trajectory): Trajectory to write
    :param path (str): Output file
    """
    meta = json.dumps(traj.metadata, sort_keys=True, default=_json_default)
    columns = [traj.time, traj.x_series, traj.phase_series]
    names = ["time_s", "x_m", "phase_rad"]
    if traj.force_series is not None:
        columns.append(traj.force_series)
        names.append("force_N")
    if traj.loop_series is not None:
        columns.append(traj.loop_series)
        names.append("loop_m")

    if os.path.splitext(path)[1] == ".npz":
        arrays = dict(zip(names, columns))
        np.savez(path, dt=traj.dt, metadata=meta, **arrays)
        return path

    header = "\n".join(
        [
            "OM_Lib trajectory",
            f"dt: {float(traj.dt)!r}",
            f"metadata: {meta}",
            "convention: displacement in m, phase in rad, force in N",
            ",".join(names),
        ]
    )
    np.savetxt(path, np.column_stack(columns), delimiter=",", header=header, fmt="%.17g")
    return path


def load_trajectory(path):
    """
    Read a trajectory written by save_trajectory
    """
    if os.path.splitext(path)[1] == ".npz":
        with np.load(path) as data:
            columns = {name: data[name] for name in data.files}
            dt = float(columns["dt"])
            meta = json.loads(str(columns["metadata"]))
    else:
        dt, meta, names = None, {}, ["time_s", "x_m", "phase_rad"]
        with open(path) as f:
            for line in f:
                if not line.startswith("#"):
                    break
                text = line[1:].strip()
                if text.startswith("dt:"):
                    dt = float(text[3:])
                elif text.startswith("metadata:"):
                    meta = json.loads(text[len("metadata:"):])
                elif text.startswith("time_s"):
                    names = text.split(",")
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        columns = {name: data[:, i] for i, name in enumerate(names)}
        if dt is None:
            dt = float(data[1, 0] - data[0, 0])

    return Trajectory(
        columns["x_m"],
        columns["phase_rad"],
        columns.get("force_N"),
        dt,
        meta,
        columns.get("loop_m"),
    )
