from dataclasses import dataclass, replace

import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models.oscillator import thermal_displacement_psd


@dataclass(frozen=True)
class ReadoutParams:
    """
    Homodyne readout of the cavity: ideal phase measurement plus a flat shot-noise floor

    :param finesse (float): Cavity finesse
    :param wavelength (float): Laser wavelength in m
    :param shot_noise_floor (float): Displacement-equivalent shot-noise PSD in m^2 s/rad
        (double-sided, angular)
    """

    finesse: float = 37000.0
    wavelength: float = 810e-9
    shot_noise_floor: float = 0.0

    def __post_init__(self):
        if not self.finesse > 0:
            raise ParameterError(f"finesse must be positive, got {self.finesse}")
        if not self.wavelength > 0:
            raise ParameterError(f"wavelength must be positive, got {self.wavelength}")
        if not self.shot_noise_floor >= 0:
            raise ParameterError(
                f"shot_noise_floor must be non-negative, got {self.shot_noise_floor}"
            )

    @classmethod
    def with_floor_below_peak(cls, p, db=40.0, finesse=37000.0, wavelength=810e-9):
        """
        Readout whose floor sits `db` decibels below the open-loop thermal peak of `p`

        :param p (OscillatorParams): Mechanical mode setting the peak level
        :param db (float): Distance of the floor below the peak in dB
        """
        peak = thermal_displacement_psd(p, p.omega_m)
        return cls(finesse, wavelength, peak * 10.0 ** (-db / 10.0))

    @property
    def phase_gain(self):
        """
        Displacement-to-phase gain 8 F/lambda in rad/m
        """
        return 8.0 * self.finesse / self.wavelength

    @property
    def phase_noise_floor(self):
        """
        Shot-noise floor expressed as a phase PSD in rad^2 s/rad
        """
        return self.shot_noise_floor * self.phase_gain ** 2

    def with_floor(self, shot_noise_floor):
        return replace(self, shot_noise_floor=shot_noise_floor)


def cavity_phase_shift(r, dx):
    """
    Phase shift of the reflected field for a mirror displacement dx, 8 F dx/lambda

    :param r (ReadoutParams): Readout parameters
    :param dx (float or np.ndarray): Displacement in m
    """
    return np.multiply(r.phase_gain, dx)


def phase_to_displacement(r, phase):
    """
    Inverse of cavity_phase_shift
    """
    return np.divide(phase, r.phase_gain)
