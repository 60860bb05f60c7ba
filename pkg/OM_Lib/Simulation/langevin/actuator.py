from dataclasses import dataclass

import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models.constants import C_LIGHT


@dataclass(frozen=True)
class ActuatorModel:
    """
    Intensity-modulated auxiliary beam pushing on the mirror by radiation pressure.

    The beam sits at a static bias power; its force 2 P_bias/c only shifts the
    equilibrium and is left out of the dynamics. Commanded power is clipped
    to [0, max_power], which limits the dynamic force to
    [-2 P_bias/c, 2 (P_max - P_bias)/c].

    :param max_power (float): Maximum beam power in W
    :param bias_power (float): Static operating point in W, max_power/2 when None
    :param saturate (bool): False removes the clipping (linear actuator)
    """

    max_power: float = 0.5
    bias_power: float = None
    saturate: bool = True

    def __post_init__(self):
        if not self.max_power > 0:
            raise ParameterError(f"max_power must be positive, got {self.max_power}")
        if self.bias_power is None:
            object.__setattr__(self, "bias_power", 0.5 * self.max_power)
        if not 0 <= self.bias_power <= self.max_power:
            raise ParameterError(
                f"bias_power must lie in [0, {self.max_power}], got {self.bias_power}"
            )

    @classmethod
    def from_feedback(cls, fb, saturate=True):
        return cls(max_power=fb.actuator_max_power, saturate=saturate)

    @property
    def force_limits(self):
        """
        (lowest, highest) dynamic force the beam can apply, in N
        """
        return (
            -2.0 * self.bias_power / C_LIGHT,
            2.0 * (self.max_power - self.bias_power) / C_LIGHT,
        )

    @property
    def max_force(self):
        """
        Largest dynamic force magnitude available in both directions
        """
        return min(-self.force_limits[0], self.force_limits[1])

    def power(self, force):
        """
        Beam power needed for a dynamic force, before clipping
        """
        return self.bias_power + 0.5 * C_LIGHT * np.asarray(force)

    def apply(self, force):
        """
        Dynamic force actually applied for a commanded one
        """
        if not self.saturate:
            return force
        lo, hi = self.force_limits
        return np.clip(force, lo, hi)

    def clips(self, force):
        """
        True if any commanded force would be clipped
        """
        if not self.saturate:
            return False
        lo, hi = self.force_limits
        force = np.asarray(force)
        return bool(np.any(force < lo) or np.any(force > hi))
