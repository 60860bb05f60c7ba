from .spectrum import Spectrum, FitResult, GainMeasurement
from .welch import (
    welch_psd,
    enbw_bins,
    normalize_to_shot_noise,
    denormalize,
    ScanAverager,
    window_kernel,
    expected_periodogram,
)
from .lorentzian import lorentzian, lorentzian_psd, lorentzian_fit, fit_model
from .metrics import (
    extract_metrics,
    band_variance,
    force_displacement_ratio,
    raw_gain,
    damping_line_scale,
    calibrate_gain,
    fit_damping_line,
)
from .analytic import analytic_spectrum
from .io import save_spectrum, load_spectrum, save_fit, load_fit
