import numpy as np
import pandas as pd

from OM_Lib.exceptions import FitConvergenceError, NoPeakError, ParameterError
from OM_Lib.models import (
    BackgroundModel,
    background_variance,
    cooling_factor_with_background,
    mode_variance,
    noise_reduction_r,
)
from OM_Lib.Spectral import (
    band_variance,
    calibrate_gain,
    extract_metrics,
    fit_damping_line,
    raw_gain,
)
from OM_Lib.Scenarios.common import BaseScenario

LOST_FIT = {"gamma_ratio": np.nan, "r_amplitude": np.nan, "cooling_factor": np.nan}


class GainSweep(BaseScenario):
    """
    Damping, amplitude noise reduction and cooling factor against the loop gain,
    with the background of the other acoustic modes in the record.

    Two cooling-factor estimators are reported: the ratio of fitted peak areas, which
    removes the flat background and follows R, and the ratio of band variances, which
    keeps it and saturates at large gains. The gain of every point is also measured
    from the actuator force and the loop input at the resonance, then normalized with
    the damping line.

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :param gains (list): g/Gamma of the points; analysis.sweep_gains when None
    :param background (BackgroundModel): Background of the record; config.background when None
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    name = "gain_sweep"

    def __init__(
        self,
        config=None,
        gains=None,
        background=None,
        verbose=False,
        log=False,
        logdir="./Experiments",
    ):
        super(GainSweep, self).__init__(config, gains, background, verbose, log, logdir)
        if background is None:
            self.background = self.config.background

    def default_gains(self):
        return self.config.analysis.sweep_gains

    def variance_band(self):
        """
        Band of the variance estimator, f_M +/- band_width Gamma/2 in Hz
        """
        p = self.oscillator
        f_m = p.omega_m / (2 * np.pi)
        half = 0.5 * self.config.analysis.band_width * p.gamma / (2 * np.pi)
        return max(f_m - half, 0.0), f_m + half

    def run(self):
        self.check_gains()
        if len(set(self.gains)) < 2:
            raise ParameterError("the gain sweep needs at least 2 distinct gains")
        p = self.oscillator
        gains = sorted(set(self.gains) | {0.0})

        if self.verbose:
            print(f"Running scenario {self.name}... ")
            print("-" * 80)

        feedbacks = [self.feedback_for(g) for g in gains]
        simulations = [self.scan_config(g) for g in gains]
        band = self.analysis_band(max(gains))
        measurements = self.measure_all(
            feedbacks, simulations, record_force=True, band=band
        )

        f_m = p.omega_m / (2 * np.pi)
        variance_band = self.variance_band()
        open_index = gains.index(0.0)
        open_fit = self.fit(measurements[open_index].spectrum, 0.0)
        fits = [
            open_fit if i == open_index else self.fit_point(m.spectrum, g)
            for i, (g, m) in enumerate(zip(gains, measurements))
        ]
        open_variance = band_variance(
            measurements[open_index].spectrum, variance_band, subtract_floor=True
        )

        raw = []
        for m in measurements:
            k = int(np.argmin(np.abs(m.force.freq - f_m)))
            # a damping force lags the loop input by a quarter period
            sign = -1.0 if m.cross[k].imag > 0 else 1.0
            raw.append((m.force.at(f_m), m.loop_input.at(f_m), sign))

        report = self.new_report()
        rows = []
        for g, fb, m, fit, (s_f, s_x, sign) in zip(gains, feedbacks, measurements, fits, raw):
            metrics = extract_metrics(open_fit, fit, p) if fit is not None else LOST_FIT
            variance = band_variance(m.spectrum, variance_band, subtract_floor=True)
            g_raw = raw_gain(s_f, s_x, sign)
            rows.append(
                {
                    "g_over_gamma": g,
                    "gamma_ratio": metrics["gamma_ratio"],
                    "r_amplitude": metrics["r_amplitude"],
                    "cooling_factor": open_variance / variance,
                    "cooling_factor_fit": metrics["cooling_factor"],
                    "r_model": noise_reduction_r(p.gamma, fb.gain),
                    "cooling_factor_model": self.cooling_model(g),
                    "g_raw": g_raw,
                    "g_measured_over_gamma": g_raw / (p.mass_eff * p.omega_m * p.gamma),
                }
            )

        fitted = [row for row in rows if np.isfinite(row["gamma_ratio"])]
        line = [(row["g_raw"], row["gamma_ratio"]) for row in fitted]
        for row, (s_f, s_x, sign) in zip(rows, raw):
            row["g_calibrated"] = calibrate_gain(s_f, s_x, line, sign).g_normalized

        for i, (g, fb, m, fit, row) in enumerate(zip(gains, feedbacks, measurements, fits, rows)):
            report.add_run(
                f"g={g:g}",
                m.spectrum,
                fit,
                row,
                self.overlay(fb, m.spectrum, background=self.background),
            )
            self.post_point_call(i, row)

        slope, intercept = fit_damping_line(
            [row["g_over_gamma"] for row in fitted], [row["gamma_ratio"] for row in fitted]
        )
        calibrated_slope, _ = fit_damping_line(
            [row["g_measured_over_gamma"] for row in fitted],
            [row["gamma_ratio"] for row in fitted],
        )
        report.summary.update(
            {
                "damping_slope": slope,
                "damping_intercept": intercept,
                "damping_slope_measured_gain": calibrated_slope,
                "cooling_factor_saturation": self.saturation(),
                "background_level": self.background.level,
                "lost_fits": len(rows) - len(fitted),
            }
        )
        report.curves["model"] = self.model_curves(min(gains), max(gains))
        return report

    def fit_point(self, spectrum, g_over_gamma):
        """
        Lorentzian fit of one closed-loop point, None when no line stands out of the
        background
        """
        try:
            return self.fit(spectrum, g_over_gamma)
        except (NoPeakError, FitConvergenceError) as error:
            if self.verbose:
                print(f"g/Gamma = {g_over_gamma:g}: no line fitted ({error})")
            return None

    def cooling_model(self, g_over_gamma, background=None):
        """
        Cooling factor expected from the band variance with the background in the record
        """
        p = self.oscillator
        return cooling_factor_with_background(
            p,
            self.background if background is None else background,
            g_over_gamma * p.gamma,
            self.config.analysis.band_width * p.gamma,
            band_limited=True,
        )

    def saturation(self):
        """
        Large-gain limit 1 + (mode variance)/(background variance) of the band estimator
        """
        p = self.oscillator
        if self.background.level == 0:
            return float("inf")
        band = self.config.analysis.band_width * p.gamma
        return 1.0 + mode_variance(p, 0.0, band) / background_variance(
            p, self.background, 0.0, band
        )

    def model_curves(self, g_min, g_max, n_points=200):
        """
        Damping line, R and the cooling factors with and without the background on a
        dense gain grid
        """
        p = self.oscillator
        lo = max(g_min, -0.99)
        g = np.linspace(lo, g_max, n_points)
        return pd.DataFrame(
            {
                "g_over_gamma": g,
                "damping_line": 1.0 + g,
                "r_model": [noise_reduction_r(p.gamma, v * p.gamma) for v in g],
                "cooling_factor_model": [self.cooling_model(v) for v in g],
                "cooling_factor_no_background": [
                    self.cooling_model(v, BackgroundModel()) for v in g
                ],
            }
        )


def run_gain_sweep(config=None, gains=None, verbose=False, log=False, logdir="./Experiments"):
    """
    Gain sweep at g/Gamma in `gains` (default analysis.sweep_gains) with the configured
    background

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :returns: ScenarioReport
    """
    return GainSweep(config, gains, verbose=verbose, log=log, logdir=logdir).run()
