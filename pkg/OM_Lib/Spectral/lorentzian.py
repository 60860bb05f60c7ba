"""
Lorentzian fit of a resonance peak.

The peak of a damped harmonic oscillator is fitted in power units versus angular
frequency with

    S(Omega) = A/((Omega_c^2 - Omega^2)^2 + Gamma^2 Omega^2) + B

whose area over f >= 0 is A/(4 Gamma Omega_c^2) and whose height above B at
Omega_c is A/(Gamma^2 Omega_c^2).

The residuals are taken between the logarithms of model and data: the scatter of
an averaged periodogram is proportional to its level, so every bin then weighs
the same and the wings constrain the width as much as the top. The log of an
average of N periodograms sits about 1/(2N) below the log of the mean, which
scales the fitted height, area and background by that factor but leaves center
and width unbiased. Internally the frequency axis is scaled by the
raw peak frequency and the PSD by the raw peak height, and the center and width
are stepped relative to the initial width, which keeps narrow peaks well
conditioned.
"""

import numpy as np
from scipy import ndimage, optimize

from OM_Lib.exceptions import FitConvergenceError, NoPeakError, ParameterError
from .spectrum import FitResult

MAX_ITERATIONS = 200
XTOL = 1e-9
MAD_SCALE = 1.4826


def lorentzian(omega, amplitude, omega_c, gamma, background=0.0):
    """
    A/((Omega_c^2 - Omega^2)^2 + Gamma^2 Omega^2) + B

    :param omega (np.ndarray): Angular frequency in rad/s
    :param amplitude (float): A in PSD units x (rad/s)^4
    :param omega_c (float): Center in rad/s
    :param gamma (float): Full width in rad/s
    :param background (float): B in PSD units
    """
    omega = np.asarray(omega, dtype=float)
    return amplitude / ((omega_c ** 2 - omega ** 2) ** 2 + gamma ** 2 * omega ** 2) + background


def lorentzian_psd(freq, center, width, area, background=0.0):
    """
    Single-sided PSD versus Hz of a Lorentzian peak given by its center and width in Hz
    and its area
    """
    omega_c, gamma = 2 * np.pi * center, 2 * np.pi * width
    amplitude = 4.0 * area * gamma * omega_c ** 2
    return lorentzian(2 * np.pi * np.asarray(freq, dtype=float), amplitude, omega_c, gamma, background)


def fit_model(fit, freq):
    """
    PSD of a FitResult evaluated at freq (Hz)
    """
    return lorentzian_psd(freq, fit.center, fit.width, fit.area, fit.background)


def _half_max_width(freq, excess, i0):
    half = 0.5 * excess[i0]
    left = i0
    while left > 0 and excess[left] > half:
        left -= 1
    right = i0
    while right < len(excess) - 1 and excess[right] > half:
        right += 1

    def crossing(i, j):
        if excess[i] == excess[j]:
            return freq[i]
        return freq[i] + (half - excess[i]) * (freq[j] - freq[i]) / (excess[j] - excess[i])

    f_left = crossing(left, left + 1) if excess[left] <= half else freq[0]
    f_right = crossing(right - 1, right) if excess[right] <= half else freq[-1]
    return max(f_right - f_left, freq[1] - freq[0])


def _initial_guess(freq, psd):
    """
    Peak position, height above the background, background and half-max width.

    The background and its scatter come from the outer tenths of the window. The
    peak is searched on the raw spectrum first, then on running means over 4, 16, ...
    bins, so that a broad line lying under a strong background is still found.
    """
    n = len(freq)
    edge = max(n // 10, 1)
    far = np.concatenate((psd[:edge], psd[-edge:]))
    background = float(np.median(far))
    spread = MAD_SCALE * float(np.median(np.abs(far - background)))

    bins, largest = 1, -np.inf
    while bins <= max(n // 4, 1):
        if bins == 1:
            excess = psd - background
            threshold = 5.0 * spread
        else:
            excess = ndimage.uniform_filter1d(psd, bins, mode="nearest") - background
            # Hann bins are correlated over about 1.5 bins
            threshold = 5.0 * spread * np.sqrt(1.5 / bins)
        i0 = int(np.argmax(excess))
        largest = max(largest, float(excess[i0]))
        if 0 < i0 < n - 1 and excess[i0] > threshold and excess[i0] > 0:
            width = _half_max_width(freq, excess, i0)
            return i0, float(excess[i0]), max(background, 0.0), width
        bins *= 4
    raise NoPeakError(
        f"no peak inside the fit window rises 5 robust deviations ({spread:.3g}) above "
        f"the background (largest excess {largest:.3g})"
    )


def lorentzian_fit(s, init_window=None, strict=False):
    """
    Least-squares fit of a Lorentzian plus a constant to a spectrum

    :param s (Spectrum): Spectrum holding the peak
    :param init_window (tuple): (f_lo, f_hi) in Hz; the whole spectrum when None
    :param strict (bool): Raise FitConvergenceError instead of returning converged=False
    :returns: FitResult
    """
    freq, psd = s.freq, s.psd
    if init_window is not None:
        f_lo, f_hi = init_window
        if not f_hi > f_lo:
            raise ParameterError(f"empty fit window ({f_lo}, {f_hi})")
        mask = (freq >= f_lo) & (freq <= f_hi)
        freq, psd = freq[mask], psd[mask]
    mask = freq > 0
    freq, psd = freq[mask], psd[mask]
    if len(freq) < 5:
        raise NoPeakError(f"fit window holds {len(freq)} bins, at least 5 are needed")

    i0, height, background, width = _initial_guess(freq, psd)
    omega0 = 2 * np.pi * freq[i0]
    g0 = width / freq[i0]
    positive = psd > 0
    u = freq[positive] / freq[i0]
    log_data = np.log(psd[positive] / height)

    def unpack(params):
        delta, log_width, log_height, root_background = params
        return (
            1.0 + g0 * delta,
            g0 * np.exp(log_width),
            np.exp(log_height),
            root_background ** 2,
        )

    def residuals(params):
        uc, g, h, b = unpack(params)
        model = h * g ** 2 * uc ** 2 / ((uc ** 2 - u ** 2) ** 2 + g ** 2 * u ** 2) + b
        return np.log(model) - log_data

    start = np.array([0.0, 0.0, 0.0, np.sqrt(background / height)])
    result = optimize.least_squares(
        residuals,
        start,
        method="lm",
        xtol=XTOL,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=MAX_ITERATIONS * (len(start) + 1),
    )
    uc, g, h, b = unpack(result.x)
    converged = bool(result.status > 0 and np.all(np.isfinite(result.x)))
    if strict and not converged:
        raise FitConvergenceError(f"Lorentzian fit did not converge: {result.message}")

    omega_c, gamma = uc * omega0, g * omega0
    peak = h * height
    return FitResult(
        center=float(omega_c / (2 * np.pi)),
        width=float(gamma / (2 * np.pi)),
        area=float(peak * gamma / 4.0),
        background=float(b * height),
        residual_rms=float(np.sqrt(np.mean(result.fun ** 2))),
        converged=converged,
        peak=float(peak),
        n_evaluations=int(result.nfev),
    )
