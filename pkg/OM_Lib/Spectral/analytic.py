import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models import (
    BackgroundModel,
    ReadoutParams,
    closed_loop_psd,
    in_loop_psd,
    offres_suppression,
    to_single_sided_hz,
)
from .spectrum import Spectrum


def analytic_spectrum(
    p,
    fb,
    freq,
    readout=None,
    background=None,
    sensing="ideal",
    use_filter=False,
    rbw=None,
    n_averages=1,
):
    """
    Spectrum of the measured displacement predicted by the closed-loop model, in the
    units of welch_psd (single-sided, per Hz)

    In "sensor" mode the loop is driven by the same shot noise that appears in the
    record, which is then squashed by the loop; in "ideal" mode the floor simply adds.

    :param p (OscillatorParams): Mechanical mode
    :param fb (FeedbackConfig): Feedback loop
    :param freq (np.ndarray): Frequencies in Hz
    :param readout (ReadoutParams): Shot-noise floor of the record, none when None
    :param background (BackgroundModel): Background of the record, none when None
    :param sensing (str): "sensor" or "ideal", as in SimConfig
    :param use_filter (bool): Include the band-pass response in the loop
    :param rbw (float): Resolution recorded on the Spectrum, the grid step when None
    """
    readout = readout if readout is not None else ReadoutParams()
    background = background if background is not None else BackgroundModel()
    freq = np.asarray(freq, dtype=float)
    if np.any(freq < 0):
        raise ParameterError("freq must be non-negative")
    omega = 2 * np.pi * freq
    floor = readout.shot_noise_floor

    if sensing == "sensor":
        psd = in_loop_psd(p, fb, omega, floor, use_filter)
    elif sensing == "ideal":
        psd = closed_loop_psd(p, fb, omega, use_filter) + floor
    else:
        raise ParameterError(f"unknown sensing mode {sensing!r}")

    if background.level:
        level = background.level
        if background.affected_by_feedback:
            level = level * offres_suppression(p, fb, omega, use_filter)
        psd = psd + level

    if rbw is None:
        rbw = float(freq[1] - freq[0]) if len(freq) > 1 else 1.0
    return Spectrum(
        freq,
        to_single_sided_hz(psd),
        rbw=rbw,
        n_averages=n_averages,
        floor=float(to_single_sided_hz(floor)),
        floor_included=True,
    )
