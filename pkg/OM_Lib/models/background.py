from dataclasses import dataclass

import numpy as np
from scipy import integrate

from OM_Lib.exceptions import ParameterError
from OM_Lib.models.feedback import (
    FeedbackConfig,
    check_stable,
    closed_loop_psd,
    offres_suppression,
)
from OM_Lib.models.oscillator import thermal_displacement_psd, thermal_variance


@dataclass(frozen=True)
class BackgroundModel:
    """
    Flat displacement noise near the analysis band, from the tails of the other
    acoustic modes

    :param level (float): Displacement-equivalent PSD in m^2 s/rad (double-sided, angular)
    :param affected_by_feedback (bool): True if the loop also acts on the background
    """

    level: float = 0.0
    affected_by_feedback: bool = False

    def __post_init__(self):
        if not self.level >= 0:
            raise ParameterError(f"level must be non-negative, got {self.level}")

    @classmethod
    def from_peak_fraction(cls, p, fraction, affected_by_feedback=False):
        """
        Background set to a fraction of the open-loop thermal peak of `p`
        """
        level = fraction * thermal_displacement_psd(p, p.omega_m)
        return cls(float(level), affected_by_feedback)


def _band(p, analysis_band):
    lo = max(p.omega_m - 0.5 * analysis_band, 0.0)
    return lo, p.omega_m + 0.5 * analysis_band


def mode_variance(p, gain, analysis_band=None):
    """
    Variance of the cooled mode; over the whole spectrum when `analysis_band` is None,
    else over Omega_M +/- analysis_band/2 (both signs of frequency)
    """
    check_stable(p.gamma, gain)
    if analysis_band is None:
        return thermal_variance(p) * p.gamma / (p.gamma + gain)
    fb = FeedbackConfig(gain=gain, filter_center=p.omega_m)
    lo, hi = _band(p, analysis_band)
    value, _ = integrate.quad(
        lambda w: float(closed_loop_psd(p, fb, w)), lo, hi, points=[p.omega_m], limit=500
    )
    return value / np.pi


def background_variance(p, bg, gain, analysis_band):
    """
    Background variance inside Omega_M +/- analysis_band/2
    """
    lo, hi = _band(p, analysis_band)
    if not bg.affected_by_feedback or gain == 0:
        return bg.level * (hi - lo) / np.pi
    fb = FeedbackConfig(gain=gain, filter_center=p.omega_m)
    value, _ = integrate.quad(
        lambda w: float(bg.level * offres_suppression(p, fb, w, use_filter=False)),
        lo,
        hi,
        points=[p.omega_m],
        limit=500,
    )
    return value / np.pi


def cooling_factor_with_background(p, bg, gain, analysis_band, band_limited=False):
    """
    Cooling factor T/T_fb inferred from the variance of the cooled mode plus a
    background that the loop leaves unchanged, normalized to 1 at g = 0.

    At large gains the measured factor saturates at
    1 + (mode variance)/(background variance in band).

    :param p (OscillatorParams): Mechanical mode
    :param bg (BackgroundModel): Background noise
    :param gain (float): Loop gain in rad/s
    :param analysis_band (float): Full width of the integration band around Omega_M in rad/s
    :param band_limited (bool): Integrate the mode over the band instead of using its
        full equipartition variance
    """
    check_stable(p.gamma, gain)
    if not analysis_band > 0:
        raise ParameterError(f"analysis_band must be positive, got {analysis_band}")
    band = analysis_band if band_limited else None
    open_var = mode_variance(p, 0.0, band) + background_variance(p, bg, 0.0, analysis_band)
    closed_var = mode_variance(p, gain, band) + background_variance(
        p, bg, gain, analysis_band
    )
    if closed_var == 0:
        return (p.gamma + gain) / p.gamma
    return open_var / closed_var
