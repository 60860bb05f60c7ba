from dataclasses import replace

import numpy as np
from scipy import signal

from OM_Lib.exceptions import InsufficientDataError, ParameterError
from .spectrum import Spectrum


def enbw_bins(window, nperseg):
    """
    Equivalent noise bandwidth of a window in bins, N sum(w^2)/(sum w)^2 (1.5 for Hann)
    """
    w = signal.get_window(window, nperseg)
    return nperseg * np.sum(w ** 2) / np.sum(w) ** 2


def _segments_for_rbw(rbw, dt, window):
    nperseg = int(round(1.5 / (rbw * dt)))
    for _ in range(3):
        nperseg = max(int(round(enbw_bins(window, max(nperseg, 8)) / (rbw * dt))), 8)
    return nperseg


def welch_psd(
    series, dt, rbw=None, window="hann", nperseg=None, overlap=0.5, n_scans=None
):
    """
    Averaged periodogram emulating a spectrum analyzer: single-sided PSD versus Hz,
    with sum(psd) df equal to the variance of the series

    :param series (np.ndarray): Uniformly sampled record
    :param dt (float): Sampling step in s
    :param rbw (float): Requested resolution bandwidth in Hz; sets the segment length
        through the window's equivalent noise bandwidth
    :param window (str): Taper applied to each segment
    :param nperseg (int): Segment length, overrides rbw
    :param overlap (float): Fraction of overlap between segments
    :param n_scans (int): Average the record as this many back-to-back scans
        without overlap, as the analyzer averages consecutive sweeps
    :returns: Spectrum whose rbw is the window ENBW over the segment duration
    """
    series = np.asarray(series, dtype=float)
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if not 0 <= overlap < 1:
        raise ParameterError(f"overlap must lie in [0, 1), got {overlap}")

    if n_scans is not None:
        nperseg = len(series) // int(n_scans)
        overlap = 0.0
    elif nperseg is None:
        if rbw is None:
            raise ParameterError("one of rbw, nperseg or n_scans is required")
        if not rbw > 0:
            raise ParameterError(f"rbw must be positive, got {rbw}")
        nperseg = _segments_for_rbw(rbw, dt, window)

    nperseg = int(nperseg)
    noverlap = int(nperseg * overlap)
    if nperseg < 2 or len(series) < nperseg:
        raise InsufficientDataError(
            f"record of {len(series)} samples is shorter than one segment of {nperseg}"
        )
    n_segments = 1 + (len(series) - nperseg) // (nperseg - noverlap)
    if n_segments < 2:
        raise InsufficientDataError(
            f"record of {len(series)} samples holds fewer than 2 segments of {nperseg}"
        )

    freq, psd = signal.welch(
        series,
        fs=1.0 / dt,
        window=window,
        nperseg=nperseg,
        noverlap=noverlap,
        scaling="density",
        return_onesided=True,
    )
    return Spectrum(
        freq,
        np.maximum(psd, 0.0),
        rbw=enbw_bins(window, nperseg) / (nperseg * dt),
        n_averages=n_segments,
    )


def normalize_to_shot_noise(s, floor, floor_included=False):
    """
    Express a spectrum in units of the shot-noise floor, so that the baseline far
    from resonance reads 1

    :param s (Spectrum): Unnormalized spectrum
    :param floor (float): Shot-noise floor in the units of s.psd (single-sided, per Hz)
    :param floor_included (bool): True if the record already contains the shot noise;
        otherwise the floor is added before dividing
    """
    if not floor > 0:
        raise ParameterError(f"floor must be positive, got {floor}")
    if s.normalized:
        raise ParameterError("spectrum is already normalized")
    psd = s.psd / floor if floor_included else (s.psd + floor) / floor
    return replace(s, psd=psd, normalized=True, floor=floor, floor_included=floor_included)


def denormalize(s):
    """
    Inverse of normalize_to_shot_noise
    """
    if not s.normalized:
        raise ParameterError("spectrum is not normalized")
    psd = s.psd * s.floor
    if not s.floor_included:
        psd = np.maximum(psd - s.floor, 0.0)
    return replace(s, psd=psd, normalized=False)


class ScanAverager:
    """
    Power average of back-to-back scans, one Hann-windowed periodogram per scan, as
    a swept analyzer averages consecutive traces; the result equals welch_psd with
    n_scans for the concatenated record

    :param dt (float): Sampling step in s
    :param window (str): Taper applied to each scan
    :param units (str): Unit of the averaged PSD
    """

    def __init__(self, dt, window="hann", units="m^2/Hz"):
        self.dt = dt
        self.window = window
        self.units = units
        self.count = 0
        self.freq = None
        self.total = None
        self.cross = {}
        self.n_per_scan = 0

    def add(self, block):
        freq, psd = signal.periodogram(
            block, fs=1.0 / self.dt, window=self.window, scaling="density"
        )
        if self.total is None:
            self.freq, self.total = freq, np.zeros_like(psd)
            self.n_per_scan = len(block)
        elif len(block) != self.n_per_scan:
            raise ParameterError("scans must have equal length")
        self.total += psd
        self.count += 1

    def add_cross(self, name, a, b):
        """
        Accumulate the cross spectrum of two records of the current scan under `name`
        """
        _, pxy = signal.csd(
            a, b, fs=1.0 / self.dt, window=self.window, nperseg=len(a), noverlap=0
        )
        self.cross[name] = self.cross.get(name, 0.0) + pxy

    def spectrum(self):
        if self.count < 2:
            raise InsufficientDataError(
                f"{self.count} scan(s) averaged, at least 2 are needed"
            )
        return Spectrum(
            self.freq,
            np.maximum(self.total / self.count, 0.0),
            rbw=enbw_bins(self.window, self.n_per_scan) / (self.n_per_scan * self.dt),
            n_averages=self.count,
            units=self.units,
        )

    def cross_spectrum(self, name):
        return self.cross[name] / self.count


def window_kernel(window, nperseg, threshold=1e-12):
    """
    Weights, summing to 1, with which a windowed periodogram spreads a line over
    neighbouring bins; (1/4, 1, 1/4)/1.5 for Hann
    """
    w = signal.get_window(window, nperseg)
    power = np.abs(np.fft.fft(w)) ** 2
    power = power / power[0]
    width = 0
    while width + 1 < nperseg // 2 and power[width + 1] > threshold:
        width += 1
    kernel = np.concatenate((power[nperseg - width:], power[: width + 1]))
    return kernel / np.sum(kernel)


def expected_periodogram(psd, window, nperseg):
    """
    Mean windowed periodogram of a process whose PSD, sampled on the bin grid, is
    `psd`; the outermost bins lack neighbours and are biased
    """
    kernel = window_kernel(window, nperseg)
    return np.convolve(np.asarray(psd, dtype=float), kernel, mode="same")
