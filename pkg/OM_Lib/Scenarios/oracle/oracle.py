import numpy as np

from OM_Lib.Spectral import expected_periodogram
from OM_Lib.Scenarios.common import BaseScenario


class OracleCheck(BaseScenario):
    """
    Regression of the simulator against the closed-loop model: on a grid of gains
    and temperatures the averaged spectra are compared with the analytic PSD, as the
    windowed analyzer would see it, within oracle_band closed-loop linewidths of the
    resonance.

    The deviation of a point is the largest absolute relative error of the band power
    over oracle_groups sub-bands, so every sub-band has to stay within
    oracle_tolerance. Points beyond it are flagged in the report; the run does not fail.

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :param gains (list): g/Gamma of the grid; analysis.oracle_gains when None
    :param temperatures (list): Temperatures of the grid in K;
        analysis.oracle_temperatures when None
    :param background (BackgroundModel): Background of the record; none when None
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    name = "oracle_check"

    def __init__(
        self,
        config=None,
        gains=None,
        temperatures=None,
        background=None,
        verbose=False,
        log=False,
        logdir="./Experiments",
    ):
        super(OracleCheck, self).__init__(config, gains, background, verbose, log, logdir)
        self.temperatures = list(
            temperatures
            if temperatures is not None
            else self.config.analysis.oracle_temperatures
        )

    def default_gains(self):
        return self.config.analysis.oracle_gains

    def compare_band(self, g_over_gamma):
        """
        Resonance +/- oracle_band closed-loop linewidths, in Hz
        """
        p = self.oscillator
        f_m = p.omega_m / (2 * np.pi)
        half = self.config.analysis.oracle_band * p.gamma * (1.0 + g_over_gamma) / (2 * np.pi)
        return max(f_m - half, 0.0), f_m + half

    def deviation(self, spectrum, model, band):
        """
        Mean and largest relative error of the band power over the sub-bands

        :param spectrum (Spectrum): Measured spectrum, wider than the band
        :param model (Spectrum): Analytic spectrum on the same grid
        :param band (tuple): (f_lo, f_hi) in Hz
        :returns: (mean absolute deviation, largest absolute deviation)
        """
        # the Hann kernel does not depend on the scan length once it is long
        expected = expected_periodogram(model.psd, "hann", 1024)
        mask = (spectrum.freq >= band[0]) & (spectrum.freq <= band[1])
        groups = np.array_split(np.flatnonzero(mask), int(self.config.analysis.oracle_groups))
        errors = np.array(
            [
                np.sum(spectrum.psd[idx]) / np.sum(expected[idx]) - 1.0
                for idx in groups
                if len(idx)
            ]
        )
        return float(np.mean(np.abs(errors))), float(np.max(np.abs(errors)))

    def run(self):
        self.check_gains()
        p, analysis = self.oscillator, self.config.analysis

        if self.verbose:
            print(f"Running scenario {self.name}... ")
            print("-" * 80)

        grid = [(g, t) for t in self.temperatures for g in self.gains]
        oscillators = [p.with_temperature(t) for _, t in grid]
        feedbacks = [self.feedback_for(g) for g, _ in grid]

        report = self.new_report()
        for i, ((g, t), osc, fb) in enumerate(zip(grid, oscillators, feedbacks)):
            band = self.compare_band(g)
            margin = 0.1 * (band[1] - band[0])
            m = self.measure(
                fb,
                oscillator=osc,
                simulation=self.scan_config(g, analysis.oracle_scans, shorten=True),
                band=(band[0] - margin, band[1] + margin),
            )
            model = self.overlay(fb, m.spectrum, oscillator=osc)
            mean_dev, max_dev = self.deviation(m.spectrum, model, band)
            row = {
                "g_over_gamma": g,
                "temperature": t,
                "deviation": max_dev,
                "mean_group_deviation": mean_dev,
                "n_averages": m.spectrum.n_averages,
                "within_tolerance": bool(max_dev <= analysis.oracle_tolerance),
            }
            if t == 0 and m.spectrum.floor > 0:
                in_band = m.spectrum.band(*band).psd
                row["normalized_mean"] = float(np.mean(in_band) / m.spectrum.floor)
            report.add_run(f"g={g:g}, T={t:g}", m.spectrum, None, row, model)
            self.post_point_call(i, row)

        deviations = [row["deviation"] for row in report.metrics]
        report.oracle_deviation = {
            "max_deviation": float(np.max(deviations)),
            "mean_deviation": float(np.mean(deviations)),
            "tolerance": analysis.oracle_tolerance,
            "within_tolerance": bool(np.max(deviations) <= analysis.oracle_tolerance),
            "n_points": len(deviations),
        }
        report.summary.update(report.oracle_deviation)
        if self.log:
            self.writer.add_scalar(
                "Oracle/max_deviation", report.oracle_deviation["max_deviation"], 0
            )
        return report


def run_oracle_check(
    config=None, gains=None, temperatures=None, verbose=False, log=False, logdir="./Experiments"
):
    """
    Simulator against closed-loop model on the analysis.oracle_gains x
    analysis.oracle_temperatures grid

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :returns: ScenarioReport
    """
    return OracleCheck(
        config, gains, temperatures, verbose=verbose, log=log, logdir=logdir
    ).run()
