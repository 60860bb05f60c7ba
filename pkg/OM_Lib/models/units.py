"""
Conversions between the internal spectral convention and the one used at
the interfaces.

Internally every spectrum is double-sided in angular frequency, with the
variance given by the integral of S(omega) d(omega)/(2 pi) over the whole
real line. Spectra written to files, fitted or plotted are single-sided
versus frequency in Hz, so that the variance is the integral of S(f) df
over f >= 0. With the 1/(2 pi) measure kept inside the angular convention
the two differ by the sidedness factor 2 only; a density per rad/s
(variance = integral of S d(omega)) differs from the single-sided Hz
density by 4 pi.
"""

import numpy as np


def hz_to_rad(f):
    return np.multiply(2 * np.pi, f)


def rad_to_hz(omega):
    return np.divide(omega, 2 * np.pi)


def to_single_sided_hz(psd_angular):
    """
    Double-sided angular PSD (variance = int S dOmega/2pi) -> single-sided PSD vs Hz

    :param psd_angular (float or np.ndarray): PSD in the internal convention
    """
    return np.multiply(2.0, psd_angular)


def per_rad_to_single_sided_hz(psd_per_rad):
    """
    Double-sided density per rad/s (variance = int S dOmega) -> single-sided PSD vs Hz
    """
    return np.multiply(4 * np.pi, psd_per_rad)


def to_db(ratio):
    return 10.0 * np.log10(ratio)


def from_db(db):
    return np.power(10.0, np.divide(db, 10.0))
