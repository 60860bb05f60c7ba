import numpy as np
from scipy import signal

from OM_Lib.exceptions import ParameterError


class BandpassFilter:
    """
    Discrete second-order resonator of the feedback loop.

    Digital counterpart (bilinear transform, prewarped at the center) of
    H(s) = (Omega_c/Q_f) s/(s^2 + (Omega_c/Q_f) s + Omega_c^2): unity gain and zero
    phase at the center, -3 dB bandwidth center/q.

    :param center (float): Center frequency in rad/s
    :param q (float): Quality factor
    :param dt (float): Sampling step in s
    """

    def __init__(self, center, q, dt):
        self.configure(center, q, dt)

    def configure(self, center, q, dt):
        if not q > 0:
            raise ParameterError(f"filter q must be positive, got {q}")
        if not dt > 0:
            raise ParameterError(f"dt must be positive, got {dt}")
        if not 0 < center * dt < np.pi:
            raise ParameterError(
                f"filter center {center:.6g} rad/s is not below the half band "
                f"pi/dt = {np.pi / dt:.6g} rad/s"
            )
        self.center = center
        self.q = q
        self.dt = dt
        self.b, self.a = signal.iirpeak(center / (2 * np.pi), q, fs=1.0 / dt)
        self.reset()

    @property
    def bandwidth(self):
        return self.center / self.q

    @property
    def coefficients(self):
        return self.b, self.a

    def reset(self):
        self.z1 = 0.0
        self.z2 = 0.0

    def update(self, value):
        """
        Advance the filter by one sample (transposed direct form II)
        """
        b0, b1, b2 = self.b
        a1, a2 = self.a[1], self.a[2]
        out = b0 * value + self.z1
        self.z1 = b1 * value - a1 * out + self.z2
        self.z2 = b2 * value - a2 * out
        return out

    def apply(self, x, zi=None):
        """
        Filter a whole record; returns (y, zf) so that records can be chained

        :param x (np.ndarray): Input record
        :param zi (np.ndarray): Filter state carried from the previous record
        """
        if zi is None:
            zi = np.zeros(2)
        return signal.lfilter(self.b, self.a, x, zi=zi)

    def response(self, omega):
        """
        Complex response at angular frequency omega in the e^{-i Omega t} convention
        used by the analytic models
        """
        _, h = signal.freqz(self.b, self.a, worN=np.atleast_1d(omega) * self.dt)
        return np.conj(h)


def bandpass_filter(center, q, dt):
    """
    Coefficients of the loop band-pass resonator

    :param center (float): Center frequency in rad/s, center*dt < pi
    :param q (float): Quality factor
    :param dt (float): Sampling step in s
    :returns: BandpassFilter holding (b, a)
    """
    return BandpassFilter(center, q, dt)
