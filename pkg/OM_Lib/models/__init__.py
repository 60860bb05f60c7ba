from .constants import K_B, C_LIGHT
from .oscillator import (
    OscillatorParams,
    susceptibility,
    langevin_force_psd,
    thermal_displacement_psd,
    thermal_variance,
    variance_to_temperature,
    ring_down_time,
    damped_frequency,
)
from .readout import ReadoutParams, cavity_phase_shift, phase_to_displacement
from .feedback import (
    FeedbackConfig,
    check_stable,
    filter_response,
    feedback_stiffness,
    loop_gain,
    closed_loop_susceptibility,
    closed_loop_psd,
    in_loop_psd,
    offres_suppression,
    effective_damping,
    noise_reduction_r,
    effective_temperature,
    effective_q,
    in_loop_variance,
    optimal_gain,
    radiation_force,
    required_power,
)
from .background import (
    BackgroundModel,
    mode_variance,
    background_variance,
    cooling_factor_with_background,
)
from .units import (
    hz_to_rad,
    rad_to_hz,
    to_single_sided_hz,
    per_rad_to_single_sided_hz,
    to_db,
    from_db,
)
