import numpy as np
from scipy import signal

from OM_Lib.exceptions import FitConvergenceError, ParameterError
from OM_Lib.models import FeedbackConfig, damped_frequency
from .langevin_sim import simulate
from .trajectory import SimConfig


def ring_down_estimate(traj, fraction=0.8, floor=0.0):
    """
    Decay rate of a freely ringing mode from the envelope of its displacement.

    The amplitude envelope decays as exp(-Gamma_fb t/2); a line is fitted to the
    log of the analytic-signal envelope over the central `fraction` of the
    record and -2 x slope is returned.

    :param traj (Trajectory): Record starting from a coherent excitation
    :param fraction (float): Central part of the record used in the fit
    :param floor (float): Envelope values at or below this level are left out
        (keeps the thermal floor out of the fit)
    :returns: Gamma_fb in rad/s
    """
    if not 0 < fraction <= 1:
        raise ParameterError(f"fraction must lie in (0, 1], got {fraction}")
    envelope = np.abs(signal.hilbert(traj.x_series))
    t = traj.time
    n = len(envelope)
    skip = int(0.5 * (1.0 - fraction) * n)
    keep = slice(skip, n - skip)
    t, envelope = t[keep], envelope[keep]
    mask = envelope > floor
    if np.count_nonzero(mask) < 3:
        raise FitConvergenceError("not enough envelope samples above the floor to fit")

    slope, _ = np.polyfit(t[mask], np.log(envelope[mask]), 1)
    if not slope < 0:
        raise FitConvergenceError(
            f"envelope does not decay (log-envelope slope {slope:.3g} /s)"
        )
    return -2.0 * slope


def _free_ring_down(p, x0, t):
    wd = damped_frequency(p)
    return x0 * np.exp(-0.5 * p.gamma * t) * (
        np.cos(wd * t) + 0.5 * p.gamma / wd * np.sin(wd * t)
    )


def convergence_order(p, dts, duration=None, x0=1e-9):
    """
    Observed global order of the deterministic integrator: the open, noiseless mode is
    released from x0 and compared with the closed-form damped oscillation for each step

    :param p (OscillatorParams): Mechanical mode
    :param dts (list): Decreasing time steps, e.g. [dt, dt/2, dt/4]
    :param duration (float): Integration time in s, 20 periods when None
    :param x0 (float): Release displacement in m
    :returns: (order, errors) with errors the max absolute deviations per step
    """
    if len(dts) < 2:
        raise ParameterError("at least two time steps are needed")
    if duration is None:
        duration = 20 * 2 * np.pi / p.omega_m
    cold = p.with_temperature(0.0)
    fb = FeedbackConfig(filter_center=p.omega_m, enabled=False)

    errors = []
    for dt in dts:
        n = int(round(duration / dt))
        cfg = SimConfig(dt=dt, n_samples=n, x0=x0, burn_in=0)
        traj = simulate(cold, None, fb, None, cfg)
        errors.append(float(np.max(np.abs(traj.x_series - _free_ring_down(p, x0, traj.time)))))

    order, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(order), errors
