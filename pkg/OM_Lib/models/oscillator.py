from dataclasses import dataclass, replace

import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models.constants import K_B


@dataclass(frozen=True)
class OscillatorParams:
    """
    Fundamental acoustic mode of the mirror treated as a single harmonic oscillator

    :param mass_eff (float): Effective mass M in kg
    :param omega_m (float): Resonance frequency Omega_M in rad/s
    :param gamma (float): Damping Gamma (energy decay rate, full linewidth) in rad/s
    :param temperature (float): Bath temperature T in K
    """

    mass_eff: float
    omega_m: float
    gamma: float
    temperature: float = 300.0

    def __post_init__(self):
        if not self.mass_eff > 0:
            raise ParameterError(f"mass_eff must be positive, got {self.mass_eff}")
        if not self.omega_m > 0:
            raise ParameterError(f"omega_m must be positive, got {self.omega_m}")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if not self.temperature >= 0:
            raise ParameterError(
                f"temperature must be non-negative, got {self.temperature}"
            )

    @classmethod
    def from_q(cls, mass_eff, omega_m, q, temperature=300.0):
        """
        Build the mode from its quality factor instead of its damping

        :param q (float): Mechanical quality factor Omega_M/Gamma
        """
        if not q > 0:
            raise ParameterError(f"q must be positive, got {q}")
        return cls(mass_eff, omega_m, omega_m / q, temperature)

    @classmethod
    def from_hz(cls, mass_eff, f_m, gamma_hz, temperature=300.0):
        """
        Build the mode from frequencies in Hz (f_M and Gamma/2pi)
        """
        return cls(mass_eff, 2 * np.pi * f_m, 2 * np.pi * gamma_hz, temperature)

    @property
    def q(self):
        return self.omega_m / self.gamma

    @property
    def stiffness(self):
        return self.mass_eff * self.omega_m ** 2

    def with_temperature(self, temperature):
        return replace(self, temperature=temperature)

    def with_gamma(self, gamma):
        return replace(self, gamma=gamma)


def susceptibility(p, omega):
    """
    Mechanical susceptibility chi(Omega) = 1/(M(Omega_M^2 - Omega^2 - i Gamma Omega))

    :param p (OscillatorParams): Mechanical mode
    :param omega (float or np.ndarray): Angular frequency in rad/s, >= 0
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ParameterError("omega must be non-negative")
    chi = 1.0 / (p.mass_eff * (p.omega_m ** 2 - omega ** 2 - 1j * p.gamma * omega))
    return chi if chi.ndim else complex(chi)


def langevin_force_psd(p):
    """
    Double-sided PSD of the Langevin force, 2 M Gamma k_B T (white)
    """
    return 2.0 * p.mass_eff * p.gamma * K_B * p.temperature


def thermal_displacement_psd(p, omega):
    """
    Open-loop displacement PSD S_x^T(Omega) = S_FT |chi(Omega)|^2 (double-sided, angular)

    :param p (OscillatorParams): Mechanical mode
    :param omega (float or np.ndarray): Angular frequency in rad/s
    """
    return langevin_force_psd(p) * np.abs(susceptibility(p, omega)) ** 2


def thermal_variance(p):
    """
    Equipartition variance k_B T/(M Omega_M^2)
    """
    return K_B * p.temperature / p.stiffness


def variance_to_temperature(p, variance):
    """
    Temperature of the thermal state with the given displacement variance,
    T = M Omega_M^2 <dx^2>/k_B

    :param p (OscillatorParams): Mechanical mode
    :param variance (float): Displacement variance in m^2
    """
    if np.any(np.asarray(variance) < 0):
        raise ParameterError("variance must be non-negative")
    return p.stiffness * variance / K_B


def ring_down_time(p):
    """
    Amplitude decay time 2/Gamma
    """
    return 2.0 / p.gamma


def damped_frequency(p):
    return p.omega_m * np.sqrt(1.0 - 1.0 / (4.0 * p.q ** 2))
