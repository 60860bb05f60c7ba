"""
Closed-loop physics of velocity feedback (cold damping).

The feedback force is written through a dynamic stiffness K(Omega) so that
the closed-loop motion obeys

    M (Omega_M^2 - Omega^2 - i Gamma Omega + K(Omega)) x = F_T.

In the ideal in-band case K = -i Omega g e^{i phi}: with phi = 0 the loop
only adds the viscous damping g, Gamma_fb = Gamma + g, and adds no force
noise. With the band-pass filter in the loop

    K(Omega) = g H(s) (s cos(phi) + Omega_c sin(phi)),   s = -i Omega

where H is the unity-gain, zero-phase-at-center resonator of the loop.
"""

from dataclasses import dataclass, replace

import numpy as np

from OM_Lib.exceptions import InstabilityError, ParameterError
from OM_Lib.models.constants import C_LIGHT, K_B
from OM_Lib.models.oscillator import langevin_force_psd


@dataclass(frozen=True)
class FeedbackConfig:
    """
    Velocity feedback loop driving the radiation-pressure actuator

    :param gain (float): Loop gain g in rad/s; negative values heat the mode
    :param loop_phase (float): Extra phase beyond the viscous quadrature, in rad
    :param filter_center (float): Band-pass center in rad/s
    :param filter_q (float): Band-pass quality factor
    :param actuator_max_power (float): Maximum power of the actuator beam in W
    :param enabled (bool): False opens the loop
    :param filtered (bool): False bypasses the band-pass filter (pure viscous loop)
    """

    gain: float = 0.0
    loop_phase: float = 0.0
    filter_center: float = 1.0
    filter_q: float = 200.0
    actuator_max_power: float = 0.5
    enabled: bool = True
    filtered: bool = True

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise ParameterError(f"gain must be finite, got {self.gain}")
        if not self.filter_center > 0:
            raise ParameterError(
                f"filter_center must be positive, got {self.filter_center}"
            )
        if not self.filter_q > 0:
            raise ParameterError(f"filter_q must be positive, got {self.filter_q}")
        if not self.actuator_max_power > 0:
            raise ParameterError(
                f"actuator_max_power must be positive, got {self.actuator_max_power}"
            )

    @classmethod
    def from_ratio(cls, p, g_over_gamma, **kwargs):
        """
        Loop with gain expressed in units of the mechanical damping, centered on the mode
        by default

        :param p (OscillatorParams): Mechanical mode
        :param g_over_gamma (float): g/Gamma
        """
        kwargs.setdefault("filter_center", p.omega_m)
        return cls(gain=g_over_gamma * p.gamma, **kwargs)

    @property
    def effective_gain(self):
        return self.gain if self.enabled else 0.0

    @property
    def filter_bandwidth(self):
        """
        -3 dB bandwidth of the band-pass filter in rad/s
        """
        return self.filter_center / self.filter_q

    def with_gain(self, gain):
        return replace(self, gain=gain)

    def disabled(self):
        return replace(self, enabled=False)


def check_stable(gamma, gain):
    if gain <= -gamma:
        raise InstabilityError(
            f"loop gain {gain:.6g} rad/s is at or beyond the instability boundary -gamma"
            f" = {-gamma:.6g} rad/s"
        )


def filter_response(fb, omega):
    """
    Complex response of the continuous band-pass prototype
    H(s) = (Omega_c/Q_f) s/(s^2 + (Omega_c/Q_f) s + Omega_c^2) at s = -i Omega

    :param fb (FeedbackConfig): Loop configuration
    :param omega (float or np.ndarray): Angular frequency in rad/s
    """
    s = -1j * np.asarray(omega, dtype=float)
    wc = fb.filter_center
    bw = wc / fb.filter_q
    return bw * s / (s ** 2 + bw * s + wc ** 2)


def feedback_stiffness(fb, omega, use_filter=False):
    """
    Dynamic stiffness per unit mass K(Omega) added by the loop

    :param fb (FeedbackConfig): Loop configuration
    :param omega (float or np.ndarray): Angular frequency in rad/s
    :param use_filter (bool): Apply the band-pass response instead of the in-band limit
    """
    omega = np.asarray(omega, dtype=float)
    g = fb.effective_gain
    if use_filter and fb.filtered:
        s = -1j * omega
        phi = fb.loop_phase
        return g * filter_response(fb, omega) * (
            s * np.cos(phi) + fb.filter_center * np.sin(phi)
        )
    return -1j * omega * g * np.exp(1j * fb.loop_phase)


def loop_gain(fb, omega, use_filter=False):
    """
    Complex gain g~(Omega) entering as Gamma + g~(Omega) in the closed-loop damping term

    :param omega (float or np.ndarray): Angular frequency in rad/s, > 0
    """
    omega = np.asarray(omega, dtype=float)
    return feedback_stiffness(fb, omega, use_filter) / (-1j * omega)


def _open_loop_stiffness(p, omega):
    return p.omega_m ** 2 - omega ** 2 - 1j * p.gamma * omega


def closed_loop_susceptibility(p, fb, omega, use_filter=False):
    """
    Closed-loop susceptibility 1/(M(Omega_M^2 - Omega^2 - i Gamma Omega + K(Omega)))

    :param p (OscillatorParams): Mechanical mode
    :param fb (FeedbackConfig): Loop configuration
    :param omega (float or np.ndarray): Angular frequency in rad/s
    :param use_filter (bool): Include the band-pass response in the loop
    """
    check_stable(p.gamma, fb.effective_gain)
    omega = np.asarray(omega, dtype=float)
    d = _open_loop_stiffness(p, omega) + feedback_stiffness(fb, omega, use_filter)
    return 1.0 / (p.mass_eff * d)


def closed_loop_psd(p, fb, omega, use_filter=False, sensor_floor=0.0):
    """
    Displacement PSD of the mode under feedback (double-sided, angular).

    In the ideal in-band case this is S_FT/(M^2((Omega_M^2 - Omega^2)^2 + (Gamma + g)^2 Omega^2)):
    the loop changes the damping without adding fluctuations. A non-zero
    `sensor_floor` adds the drive of the sensor noise fed back through the loop.

    :param p (OscillatorParams): Mechanical mode
    :param fb (FeedbackConfig): Loop configuration
    :param omega (float or np.ndarray): Angular frequency in rad/s
    :param use_filter (bool): Include the band-pass response in the loop
    :param sensor_floor (float): Displacement-equivalent sensor PSD seen by the loop
    """
    chi = closed_loop_susceptibility(p, fb, omega, use_filter)
    force = langevin_force_psd(p)
    if sensor_floor:
        k = feedback_stiffness(fb, omega, use_filter)
        force = force + p.mass_eff ** 2 * np.abs(k) ** 2 * sensor_floor
    return force * np.abs(chi) ** 2


def in_loop_psd(p, fb, omega, sensor_floor, use_filter=False):
    """
    PSD of the sensor record itself (motion plus sensor noise) when the same
    record drives the loop; sensor noise is squashed by |D_0/D_fb|^2

    :param sensor_floor (float): Displacement-equivalent sensor PSD (double-sided, angular)
    """
    omega = np.asarray(omega, dtype=float)
    chi = closed_loop_susceptibility(p, fb, omega, use_filter)
    squash = np.abs(p.mass_eff * _open_loop_stiffness(p, omega) * chi) ** 2
    return langevin_force_psd(p) * np.abs(chi) ** 2 + sensor_floor * squash


def offres_suppression(p, fb, omega, use_filter=True):
    """
    Ratio closed/open of the displacement PSD, |chi_fb/chi|^2; < 1 where the loop cools

    :param p (OscillatorParams): Mechanical mode
    :param fb (FeedbackConfig): Loop configuration
    :param omega (float or np.ndarray): Angular frequency in rad/s
    """
    omega = np.asarray(omega, dtype=float)
    d0 = _open_loop_stiffness(p, omega)
    check_stable(p.gamma, fb.effective_gain)
    return np.abs(d0 / (d0 + feedback_stiffness(fb, omega, use_filter))) ** 2


def effective_damping(gamma, gain):
    check_stable(gamma, gain)
    return gamma + gain


def noise_reduction_r(gamma, gain):
    """
    Amplitude noise reduction at resonance R = (Gamma + g)/Gamma = Gamma_fb/Gamma

    :param gamma (float): Mechanical damping in rad/s
    :param gain (float): Loop gain in rad/s
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    check_stable(gamma, gain)
    return (gamma + gain) / gamma


def effective_temperature(p, gain):
    """
    Temperature T_fb = T Gamma/(Gamma + g) of the equivalent thermal equilibrium

    :param p (OscillatorParams): Mechanical mode
    :param gain (float): Loop gain in rad/s
    """
    check_stable(p.gamma, gain)
    return p.temperature * p.gamma / (p.gamma + gain)


def effective_q(p, gain):
    """
    Quality factor of the closed-loop resonance Omega_M/(Gamma + g)
    """
    return p.omega_m / effective_damping(p.gamma, gain)


def in_loop_variance(p, gain, sensor_floor):
    """
    Motion variance with the sensor noise fed back through an ideal viscous loop,
    (k_B T Gamma/(M Omega_M^2) + g^2 S_n/2)/(Gamma + g)

    :param sensor_floor (float): Displacement-equivalent sensor PSD (double-sided, angular)
    """
    check_stable(p.gamma, gain)
    thermal = K_B * p.temperature * p.gamma / p.stiffness
    return (thermal + 0.5 * gain ** 2 * sensor_floor) / (p.gamma + gain)


def optimal_gain(p, sensor_floor):
    """
    Gain minimizing in_loop_variance; infinite without sensor noise
    """
    if sensor_floor <= 0:
        return np.inf
    thermal = K_B * p.temperature * p.gamma / p.stiffness
    return -p.gamma + np.sqrt(p.gamma ** 2 + 2.0 * thermal / sensor_floor)


def radiation_force(power):
    """
    Force 2P/c of a beam of power P reflected at normal incidence
    """
    return np.multiply(2.0 / C_LIGHT, power)


def required_power(p, gain):
    """
    RMS modulation power the actuator needs to hold the cooled thermal state,
    P = c M |g| v_rms/2 with v_rms^2 = k_B T_fb/M

    :param p (OscillatorParams): Mechanical mode
    :param gain (float): Loop gain in rad/s
    """
    v_rms = np.sqrt(K_B * effective_temperature(p, gain) / p.mass_eff)
    return 0.5 * C_LIGHT * p.mass_eff * abs(gain) * v_rms
