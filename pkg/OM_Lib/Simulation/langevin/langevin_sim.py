"""
Time-domain integration of the mirror's equation of motion

    x' = v,   M v' = -M Omega_M^2 x - M Gamma v + F_T + F_rad

driven by the Langevin force F_T and by the radiation-pressure force of the
velocity-feedback loop.

The integrator is the semi-implicit Euler-Maruyama scheme

    v[n+1] = a v[n] - (w/dt) x[n] + dt (rho F_T[n] + F_rad[n])/M
    x[n+1] = x[n] + dt v[n+1]

with exponentially fitted coefficients: a = exp(-Gamma dt) and w are chosen so
that the free oscillator has exactly the continuous poles, and rho = sin(theta)/theta
(theta = Omega_M dt) corrects the discrete force-to-displacement gain at resonance.

The loop senses x (plus shot noise in "sensor" mode and the background
when the loop acts on it), passes it through the band-pass resonator and forms
the velocity from the band-pass output:

    F_rad[n] = -M g (c0 y[n] + c1 y[n-1])

c0 and c1 combine the backward difference of y with y itself so that, at the
filter center, the force equals -M g (cos(phi) v + sin(phi) Omega_c x) exactly.

The linear loop is a fixed-coefficient recurrence and is run record by record
through scipy.signal.lfilter; when the actuator clips, the same recurrence is
stepped sample by sample.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import signal
from tqdm import tqdm

from OM_Lib.exceptions import DivergenceError, InstabilityError, ParameterError
from OM_Lib.models import cavity_phase_shift, check_stable, langevin_force_psd
from OM_Lib.Simulation.common.base_class import BaseSimulator
from .filters import bandpass_filter
from .trajectory import OscState, Trajectory

CONVENTIONS = {
    "displacement": "m",
    "phase": "rad",
    "force": "N, dynamic part only (static bias removed)",
    "psd": "single-sided per Hz at interfaces, double-sided angular internally",
}


def _sinc(x):
    return np.sinc(x / np.pi)


def thermal_force_step(p, rng, dt):
    """
    One sample of the discrete Langevin force: zero mean, variance 2 M Gamma k_B T/dt,
    so that the double-sided PSD of the stream is 2 M Gamma k_B T

    :param p (OscillatorParams): Mechanical mode
    :param rng (np.random.Generator): Random stream of the run
    :param dt (float): Time step in s
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if p.temperature == 0:
        return 0.0
    return float(rng.normal(0.0, np.sqrt(langevin_force_psd(p) / dt)))


def thermal_force(p, rng, dt, n):
    """
    `n` consecutive samples of thermal_force_step
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    sigma = np.sqrt(langevin_force_psd(p) / dt)
    if sigma == 0:
        return np.zeros(n)
    return sigma * rng.standard_normal(n)


class DiscreteLoop:
    """
    Coefficients of the discretized closed loop

    :param p (OscillatorParams): Mechanical mode
    :param fb (FeedbackConfig): Feedback loop
    :param dt (float): Time step in s
    """

    def __init__(self, p, fb, dt):
        self.p = p
        self.fb = fb
        self.dt = dt
        self.mass = p.mass_eff

        theta_m = p.omega_m * dt
        omega_d = np.sqrt(complex(p.omega_m ** 2 - 0.25 * p.gamma ** 2))
        self.a = np.exp(-p.gamma * dt)
        self.A = float((2.0 * np.exp(-0.5 * p.gamma * dt) * np.cos(omega_d * dt)).real)
        self.w = 1.0 + self.a - self.A
        self.rho = _sinc(theta_m)

        self.gain = fb.effective_gain
        self.closed = self.gain != 0
        self.filtered = fb.filtered
        if fb.filtered:
            self.filter = bandpass_filter(fb.filter_center, fb.filter_q, dt)
            self.b, self.af = self.filter.coefficients
        else:
            self.filter = None
            self.b, self.af = np.array([1.0]), np.array([1.0])

        theta_c = fb.filter_center * dt
        half = 0.5 * theta_c
        rho_c = _sinc(0.5 * (theta_c + theta_m)) * _sinc(0.5 * (theta_c - theta_m))
        k_v = rho_c * np.cos(fb.loop_phase) / np.cos(half) * half / np.sin(half)
        k_y = rho_c * fb.filter_center * (np.sin(fb.loop_phase) - np.cos(fb.loop_phase) * np.tan(half))
        self.c0 = k_v / dt + k_y
        self.c1 = -k_v / dt

        am = np.array([1.0, -self.A, self.a])
        cb = np.convolve([self.c0, self.c1], self.b)
        den = np.convolve(am, self.af)
        loop_term = dt ** 2 * self.gain * np.concatenate(([0.0], cb))
        size = max(len(den), len(loop_term))
        self.den = _pad(den, size) + _pad(loop_term, size)
        self.num_force = _pad(dt ** 2 / self.mass * np.concatenate(([0.0], self.af)), size)
        self.num_sensor = _pad(-loop_term, size)
        self.num_init = _pad(self.af, size)

        self.poles = np.roots(self.den)
        self.radius = float(np.max(np.abs(self.poles)))
        if self.radius >= 1.0:
            raise InstabilityError(
                f"discrete closed loop is unstable (largest pole radius {self.radius:.12f})"
            )

    @property
    def decay_samples(self):
        """
        Samples per e-fold of the slowest closed-loop amplitude decay
        """
        return -1.0 / np.log(self.radius)

    def controller_force(self, sensed, zi=None):
        """
        Commanded force for a sensed displacement record, before actuator clipping;
        linear in the gain for a given record

        :param sensed (np.ndarray): Displacement record entering the loop
        :param zi (tuple): (filter state, difference state) carried between records
        :returns: (force, zf)
        """
        if zi is None:
            zi = (np.zeros(len(self.af) - 1 or 1), np.zeros(1))
        if self.filtered:
            y, zf_filter = signal.lfilter(self.b, self.af, sensed, zi=zi[0])
        else:
            y, zf_filter = np.asarray(sensed, dtype=float), zi[0]
        diff, zf_diff = signal.lfilter([self.c0, self.c1], [1.0], y, zi=zi[1])
        return -self.mass * self.gain * diff, (zf_filter, zf_diff)


def _pad(poly, size):
    return np.concatenate((poly, np.zeros(size - len(poly))))


class NoiseSource:
    """
    Seed-derived noise of one run: one child seed per scan (plus one for the burn-in),
    each split into independent thermal, sensor and background streams, so that the
    thermal stream does not depend on the other noise settings

    :param p (OscillatorParams): Mechanical mode
    :param readout (ReadoutParams): Shot-noise floor of the sensor
    :param background (BackgroundModel): Background added to the sensor record
    :param config (SimConfig): Time grid and seed
    """

    def __init__(self, p, readout, background, config):
        self.p = p
        self.dt = config.dt
        self.sigma_sensor = np.sqrt(readout.shot_noise_floor / config.dt)
        self.sigma_background = np.sqrt(background.level / config.dt)
        root = np.random.SeedSequence(int(config.seed))
        children = root.spawn(int(config.n_scans) + 1)
        self.burn_seed = children[0]
        self.scan_seeds = children[1:]
        self.threads = int(config.threads)

    def draw(self, seed, n):
        thermal_seed, sensor_seed, background_seed = seed.spawn(3)
        thermal = thermal_force(self.p, np.random.default_rng(thermal_seed), self.dt, n)
        sensor = self._white(sensor_seed, self.sigma_sensor, n)
        background = self._white(background_seed, self.sigma_background, n)
        return thermal, sensor, background

    @staticmethod
    def _white(seed, sigma, n):
        if sigma == 0:
            return np.zeros(n)
        return sigma * np.random.default_rng(seed).standard_normal(n)

    def scans(self, n):
        """
        Yield the noise of every scan in order, drawn `threads` scans at a time
        """
        if self.threads == 1:
            for seed in self.scan_seeds:
                yield self.draw(seed, n)
            return
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            for start in range(0, len(self.scan_seeds), self.threads):
                chunk = self.scan_seeds[start:start + self.threads]
                for noise in pool.map(lambda s: self.draw(s, n), chunk):
                    yield noise


class LangevinSimulator(BaseSimulator):
    """
    Stochastic simulation of the mirror mode under cold-damping feedback

    :param oscillator (OscillatorParams): Mechanical mode
    :param readout (ReadoutParams): Cavity readout and shot-noise floor
    :param feedback (FeedbackConfig): Feedback loop
    :param actuator (ActuatorModel): Radiation-pressure actuator
    :param config (SimConfig): Time grid, scans and seed
    :param background (BackgroundModel): Background added to the sensor record
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    def __init__(
        self,
        oscillator,
        readout=None,
        feedback=None,
        actuator=None,
        config=None,
        background=None,
        verbose=False,
        log=False,
        logdir="./Experiments",
    ):
        super(LangevinSimulator, self).__init__(
            oscillator,
            readout,
            feedback,
            actuator,
            config,
            background,
            verbose,
            log,
            logdir,
        )
        self.burn_in = None
        self.clipped_from = None

    def simulate(self):
        """
        Run the configured scans and return the Trajectory
        """
        xs, phases, forces, sensed = [], [], [], []
        for x, phase, force, loop_input in self.simulate_scans():
            xs.append(x)
            phases.append(phase)
            if force is not None:
                forces.append(force)
                sensed.append(loop_input)

        cfg = self.config
        if self.clipped_from is None:
            path = "linear"
        else:
            path = f"stepwise from scan {self.clipped_from}"
        metadata = {
            **self.get_parameters(),
            "burn_in": int(self.burn_in),
            "integration": path,
            "conventions": CONVENTIONS,
        }
        return Trajectory(
            np.concatenate(xs),
            np.concatenate(phases),
            np.concatenate(forces) if forces else None,
            cfg.dt,
            metadata,
            np.concatenate(sensed) if sensed else None,
        )

    def simulate_scans(self):
        """
        Yield (x, phase, force, loop input) scan by scan without keeping the whole run;
        force and loop input are None unless record_force is set.

        The linear loop runs record by record; when the actuator clips, the run is
        replayed sample by sample with the same noise and continues from the scan
        that clipped.
        """
        p, cfg = self.oscillator, self.config
        if cfg is None:
            raise ParameterError("a SimConfig is required to simulate")
        cfg.check(p)
        if self.feedback.enabled and self.feedback.gain != 0:
            check_stable(p.gamma, self.feedback.gain)
        gamma_fb = p.gamma + self.feedback.effective_gain
        if not cfg.coherent_start and not cfg.resolves(gamma_fb):
            raise ParameterError(
                f"{cfg.n_samples} samples of {cfg.dt:.3g} s do not cover 10 closed-loop "
                f"decay times (Gamma_fb = {gamma_fb:.3g} rad/s)"
            )
        loop = DiscreteLoop(p, self.feedback, cfg.dt)
        self.burn_in = self._burn_in(loop)
        self.clipped_from = None

        if self.verbose:
            print("Simulating... ")

        done = 0
        try:
            for records in self._scans(loop, stepwise=False):
                yield records
                done += 1
        except _Clipped:
            if self.verbose:
                print("Actuator saturates, switching to the stepwise loop")
            self.clipped_from = done
            for scan, records in enumerate(self._scans(loop, stepwise=True)):
                if scan >= done:
                    yield records

    def loop_noise(self, sensor, background):
        """
        Noise that enters the error signal along with x: the shot noise in "sensor"
        mode and the background when the loop acts on it; None when there is neither
        """
        noise = None
        if self.config.sensing == "sensor":
            noise = sensor
        if self.background.affected_by_feedback and self.background.level > 0:
            noise = background if noise is None else noise + background
        return noise

    def controller_force(self, sensed):
        """
        Force the loop would command for a given sensed displacement record
        """
        loop = DiscreteLoop(self.oscillator, self.feedback, self.config.dt)
        force, _ = loop.controller_force(sensed)
        return force

    def _burn_in(self, loop):
        cfg = self.config
        if cfg.burn_in is not None:
            return int(cfg.burn_in)
        if cfg.coherent_start:
            return 0
        return int(np.ceil(5.0 * loop.decay_samples))

    def _scans(self, loop, stepwise):
        cfg = self.config
        noise = NoiseSource(self.oscillator, self.readout, self.background, cfg)
        runner = _StepwiseRunner(self, loop) if stepwise else _LinearRunner(self, loop)

        if self.burn_in:
            runner.run(noise.draw(noise.burn_seed, self.burn_in))

        scans = tqdm(
            noise.scans(int(cfg.n_samples)),
            total=int(cfg.n_scans),
            disable=not self.verbose,
        )
        for scan, block in enumerate(scans):
            x, force = runner.run(block)
            _, sensor, background = block
            phase = cavity_phase_shift(self.readout, x + sensor + background)
            self.post_scan_call(scan, x)
            if not cfg.record_force:
                yield x, phase, None, None
            else:
                noise = self.loop_noise(sensor, background)
                yield x, phase, force, (x if noise is None else x + noise)


class _Clipped(Exception):
    pass


class _LinearRunner:
    """
    Runs records through the closed-loop transfer functions, carrying filter states
    """

    def __init__(self, sim, loop):
        self.sim = sim
        self.loop = loop
        cfg = sim.config
        order = len(loop.den) - 1
        self.zi_force = np.zeros(order)
        self.zi_sensor = np.zeros(order)
        self.zi_init = np.zeros(order)
        self.zi_ctrl = None
        self.coherent = cfg.coherent_start
        self.started = False

    def run(self, block):
        loop, cfg = self.loop, self.sim.config
        thermal, sensor, background = block
        n = len(thermal)
        noise = self.sim.loop_noise(sensor, background)

        x, self.zi_force = signal.lfilter(
            loop.num_force, loop.den, loop.rho * thermal, zi=self.zi_force
        )
        if loop.closed and noise is not None and np.any(noise):
            xs, self.zi_sensor = signal.lfilter(
                loop.num_sensor, loop.den, noise, zi=self.zi_sensor
            )
            x = x + xs
        if self.coherent:
            w = np.zeros(n)
            if not self.started:
                w[0] = cfg.x0
                if n > 1:
                    w[1] = -loop.a * (cfg.x0 - cfg.dt * cfg.v0)
            xw, self.zi_init = signal.lfilter(loop.num_init, loop.den, w, zi=self.zi_init)
            x = x + xw
        self.started = True

        if not np.all(np.isfinite(x)):
            raise DivergenceError("simulated displacement is not finite")

        force = np.zeros(n)
        if loop.closed:
            sensed = x if noise is None else x + noise
            force, self.zi_ctrl = loop.controller_force(sensed, self.zi_ctrl)
            if self.sim.actuator.clips(force):
                raise _Clipped()
        return x, force


class _StepwiseRunner:
    """
    Steps the same recurrence sample by sample, clipping the actuator force
    """

    def __init__(self, sim, loop):
        self.sim = sim
        self.loop = loop
        cfg = sim.config
        self.state = OscState(cfg.x0, cfg.v0)
        if sim.actuator.saturate:
            self.lo, self.hi = sim.actuator.force_limits
        else:
            self.lo, self.hi = -np.inf, np.inf
    def run(self, block):
        loop, dt = self.loop, self.loop.dt
        thermal, sensor, background = block
        n = len(thermal)
        noise = self.sim.loop_noise(sensor, background)
        if noise is None:
            noise = np.zeros(n)
        mass, gain = loop.mass, loop.gain
        a, w_dt, rho = loop.a, loop.w / dt, loop.rho
        c0, c1 = loop.c0, loop.c1
        b0, b1, b2 = (list(loop.b) + [0.0, 0.0])[:3]
        a1, a2 = (list(loop.af[1:]) + [0.0, 0.0])[:2]
        filtered, closed = loop.filtered, loop.closed
        lo, hi = self.lo, self.hi

        state = self.state
        x, v, y_prev = state.x, state.v, state.y_prev
        z1, z2 = state.filter_state
        xs = np.empty(n)
        forces = np.zeros(n)
        for i in range(n):
            xs[i] = x
            force = 0.0
            if closed:
                sensed = x + noise[i]
                if filtered:
                    y = b0 * sensed + z1
                    z1 = b1 * sensed - a1 * y + z2
                    z2 = b2 * sensed - a2 * y
                else:
                    y = sensed
                force = min(max(-mass * gain * (c0 * y + c1 * y_prev), lo), hi)
                y_prev = y
                forces[i] = force
            v = a * v - w_dt * x + dt * (rho * thermal[i] + force) / mass
            x = x + dt * v

        self.state = OscState(x, v, (z1, z2), y_prev)
        if not np.all(np.isfinite(xs)) or not self.state.is_finite():
            raise DivergenceError("simulated displacement is not finite")
        return xs, forces


def simulate(p, r, fb, act, cfg, background=None, verbose=False):
    """
    Integrate the closed-loop Langevin equation

    :param p (OscillatorParams): Mechanical mode
    :param r (ReadoutParams): Cavity readout and shot-noise floor
    :param fb (FeedbackConfig): Feedback loop
    :param act (ActuatorModel): Radiation-pressure actuator
    :param cfg (SimConfig): Time grid, scans and seed
    :param background (BackgroundModel): Background added to the sensor record
    :returns: Trajectory, bit-identical for identical inputs
    """
    return LangevinSimulator(p, r, fb, act, cfg, background, verbose=verbose).simulate()
