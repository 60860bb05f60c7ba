from .langevin import (
    BandpassFilter,
    bandpass_filter,
    ActuatorModel,
    SimConfig,
    OscState,
    Trajectory,
    save_trajectory,
    load_trajectory,
    DiscreteLoop,
    LangevinSimulator,
    NoiseSource,
    thermal_force_step,
    thermal_force,
    simulate,
    ring_down_estimate,
    convergence_order,
)
from .common import BaseSimulator
