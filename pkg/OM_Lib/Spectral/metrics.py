import numpy as np
from scipy import integrate, signal

from OM_Lib.exceptions import DegenerateFitError, FitConvergenceError, ParameterError
from .spectrum import GainMeasurement


def extract_metrics(open_fit, closed_fit, p=None):
    """
    Damping, amplitude noise reduction and cooling factor from the open-loop and
    closed-loop fits

    :param open_fit (FitResult): Fit without feedback
    :param closed_fit (FitResult): Fit with feedback
    :param p (OscillatorParams): Mode; adds Gamma_fb and T_fb to the result when given
    :returns: dict with gamma_ratio, r_amplitude and cooling_factor
    """
    for name, fit in (("open-loop", open_fit), ("closed-loop", closed_fit)):
        if not fit.converged:
            raise FitConvergenceError(f"{name} fit did not converge")

    metrics = {
        "gamma_ratio": closed_fit.width / open_fit.width,
        "r_amplitude": float(np.sqrt(open_fit.peak / closed_fit.peak)),
        "cooling_factor": open_fit.area / closed_fit.area,
    }
    if p is not None:
        metrics["gamma_fb"] = metrics["gamma_ratio"] * p.gamma
        metrics["temperature_fb"] = p.temperature / metrics["cooling_factor"]
    return metrics


def band_variance(s, band, subtract_floor=False, floor=None):
    """
    Trapezoidal integral of the spectrum over a band

    :param s (Spectrum): Spectrum to integrate
    :param band (tuple): (f_lo, f_hi) in Hz
    :param subtract_floor (bool): Remove a flat floor before integrating
    :param floor (float): Floor level in PSD units, s.floor_level when None
    """
    f_lo, f_hi = band
    mask = (s.freq >= f_lo) & (s.freq <= f_hi)
    if np.count_nonzero(mask) < 2:
        raise ParameterError(f"band ({f_lo}, {f_hi}) Hz holds fewer than 2 bins")
    psd = s.psd[mask]
    if subtract_floor:
        psd = psd - (s.floor_level if floor is None else floor)
    return float(integrate.trapezoid(psd, s.freq[mask]))


def force_displacement_ratio(x, force, dt, omega, nperseg):
    """
    Spectra of the actuator force and of the displacement at one frequency, and the
    sign of the loop read from their cross spectrum

    :param x (np.ndarray): Displacement record seen by the loop
    :param force (np.ndarray): Actuator force record
    :param dt (float): Sampling step in s
    :param omega (float): Analysis frequency in rad/s (the resonance)
    :param nperseg (int): Segment length of the averages
    :returns: (force PSD, displacement PSD, sign) at the bin nearest omega
    """
    fs = 1.0 / dt
    freq, s_x = signal.welch(x, fs=fs, nperseg=nperseg)
    _, s_f = signal.welch(force, fs=fs, nperseg=nperseg)
    _, s_xf = signal.csd(x, force, fs=fs, nperseg=nperseg)
    k = int(np.argmin(np.abs(freq - omega / (2 * np.pi))))
    # a damping force lags the displacement by a quarter period
    sign = -1.0 if s_xf[k].imag > 0 else 1.0
    return float(s_f[k]), float(s_x[k]), sign


def raw_gain(force_spectrum_at_peak, displacement_psd_at_peak, sign=1.0):
    """
    Signed estimate sqrt(S_F/S_x) at the resonance, proportional to g
    """
    if not displacement_psd_at_peak > 0:
        raise ParameterError("displacement PSD at the peak must be positive")
    return float(sign * np.sqrt(force_spectrum_at_peak / displacement_psd_at_peak))


def damping_line_scale(damping_line):
    """
    Scale k of the line gamma_ratio = 1 + k g_raw through (0, 1), least squares

    :param damping_line (list): (g_raw, gamma_ratio) pairs
    """
    points = np.asarray(damping_line, dtype=float)
    if points.ndim != 2 or len(points) < 2:
        raise DegenerateFitError("the damping line needs at least 2 points")
    g_raw, ratio = points[:, 0], points[:, 1]
    if np.ptp(g_raw) == 0:
        raise DegenerateFitError("all raw gains are equal")
    return float(np.sum(g_raw * (ratio - 1.0)) / np.sum(g_raw ** 2))


def calibrate_gain(
    force_spectrum_at_peak, displacement_psd_at_peak, damping_line, sign=1.0
):
    """
    Gain of one run from the ratio of the actuator and displacement spectra at the
    resonance, normalized to the damping with the measured damping line

    :param force_spectrum_at_peak (float): Actuator force PSD at the resonance
    :param displacement_psd_at_peak (float): Displacement PSD at the resonance
    :param damping_line (list): (g_raw, gamma_ratio) pairs of the whole sweep
    :param sign (float): Loop sign, from force_displacement_ratio
    """
    g_raw = raw_gain(force_spectrum_at_peak, displacement_psd_at_peak, sign)
    return GainMeasurement(g_raw, damping_line_scale(damping_line) * g_raw)


def fit_damping_line(g_normalized, gamma_ratio):
    """
    Straight line gamma_ratio = slope g/Gamma + intercept through the calibrated sweep

    :returns: (slope, intercept)
    """
    g_normalized = np.asarray(g_normalized, dtype=float)
    if len(g_normalized) < 2 or np.ptp(g_normalized) == 0:
        raise DegenerateFitError("all calibrated gains are equal")
    slope, intercept = np.polyfit(g_normalized, np.asarray(gamma_ratio, dtype=float), 1)
    return float(slope), float(intercept)
