from dataclasses import dataclass, replace

import numpy as np

from OM_Lib.exceptions import ParameterError


@dataclass
class Spectrum:
    """
    Averaged single-sided power spectral density versus frequency in Hz, as
    displayed by a spectrum analyzer

    :param freq (np.ndarray): Increasing frequencies in Hz
    :param psd (np.ndarray): PSD in units^2/Hz, or dimensionless when normalized
    :param rbw (float): Resolution bandwidth in Hz
    :param n_averages (int): Number of averaged segments
    :param normalized (bool): True once divided by the shot-noise floor
    :param floor (float): Shot-noise floor in units^2/Hz (single-sided), 0 if unknown
    :param floor_included (bool): True if the floor was already part of the measured record
    :param units (str): Unit of the unnormalized PSD
    """

    freq: np.ndarray
    psd: np.ndarray
    rbw: float
    n_averages: int = 1
    normalized: bool = False
    floor: float = 0.0
    floor_included: bool = True
    units: str = "m^2/Hz"

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.freq.shape != self.psd.shape or self.freq.ndim != 1:
            raise ParameterError("freq and psd must be 1-D arrays of equal length")
        if len(self.freq) > 1 and np.any(np.diff(self.freq) <= 0):
            raise ParameterError("freq must be strictly increasing")
        if np.any(self.psd < 0):
            raise ParameterError("psd must be non-negative")
        if not self.rbw > 0:
            raise ParameterError(f"rbw must be positive, got {self.rbw}")

    def __len__(self):
        return len(self.freq)

    @property
    def df(self):
        return float(self.freq[1] - self.freq[0])

    @property
    def omega(self):
        return 2 * np.pi * self.freq

    @property
    def floor_level(self):
        """
        Shot-noise floor in the units of psd
        """
        return 1.0 if self.normalized else self.floor

    @property
    def unit_label(self):
        return "shot-noise units" if self.normalized else self.units

    def band(self, f_lo, f_hi):
        """
        Part of the spectrum with f_lo <= freq <= f_hi
        """
        mask = (self.freq >= f_lo) & (self.freq <= f_hi)
        return replace(self, freq=self.freq[mask], psd=self.psd[mask])

    def at(self, f):
        """
        PSD linearly interpolated at frequency f
        """
        return np.interp(f, self.freq, self.psd)

    def peak_frequency(self):
        """
        Frequency of the largest PSD value (lowest one on ties)
        """
        return float(self.freq[int(np.argmax(self.psd))])


@dataclass
class FitResult:
    """
    Lorentzian-plus-constant fit of a resonance peak

    :param center (float): Resonance frequency Omega_c/2pi in Hz
    :param width (float): Full width Gamma_fb/2pi in Hz
    :param area (float): Variance under the fitted peak, background excluded
    :param background (float): Flat background in PSD units
    :param residual_rms (float): RMS of the log residuals over the fitted bins
    :param converged (bool): False when the iteration budget ran out
    :param peak (float): Height of the fitted peak above background at the center
    :param n_evaluations (int): Model evaluations used
    """

    center: float
    width: float
    area: float
    background: float
    residual_rms: float
    converged: bool
    peak: float = float("nan")
    n_evaluations: int = 0

    @property
    def gamma(self):
        """
        Full width in rad/s
        """
        return 2 * np.pi * self.width

    @property
    def quality_factor(self):
        return self.center / self.width


@dataclass
class GainMeasurement:
    """
    Loop gain measured from the actuator and displacement spectra

    :param g_raw (float): Signed ratio estimate, proportional to g
    :param g_normalized (float): g/Gamma after calibration on the damping line
    """

    g_raw: float
    g_normalized: float

    def __post_init__(self):
        if not (np.isfinite(self.g_raw) and np.isfinite(self.g_normalized)):
            raise ParameterError("gain measurement must be finite")
