from .filters import BandpassFilter, bandpass_filter
from .actuator import ActuatorModel
from .trajectory import (
    SimConfig,
    OscState,
    Trajectory,
    save_trajectory,
    load_trajectory,
)
from .langevin_sim import (
    DiscreteLoop,
    LangevinSimulator,
    NoiseSource,
    thermal_force_step,
    thermal_force,
    simulate,
)
from .ring_down import ring_down_estimate, convergence_order
