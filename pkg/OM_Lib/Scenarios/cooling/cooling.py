import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models import noise_reduction_r, to_db
from OM_Lib.Spectral import extract_metrics
from OM_Lib.Scenarios.common import BaseScenario


class CoolingSpectra(BaseScenario):
    """
    Spectra of the mode without feedback and with feedback of increasing gain;
    the peak flattens and widens as 1 + g/Gamma

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :param gains (list): g/Gamma of the spectra, 0 first; analysis.cooling_gains when None
    :param background (BackgroundModel): Background of the sensor record; none when None
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    name = "cooling_spectra"

    def default_gains(self):
        return self.config.analysis.cooling_gains

    def run(self):
        if not self.gains or self.gains[0] != 0:
            raise ParameterError("the first gain of the cooling spectra must be 0")
        self.check_gains()
        p = self.oscillator

        if self.verbose:
            print(f"Running scenario {self.name}... ")
            print("-" * 80)

        feedbacks = [self.feedback_for(g) for g in self.gains]
        band = self.analysis_band(max(self.gains))
        measurements = self.measure_all(feedbacks, band=band)

        report = self.new_report()
        open_fit = None
        for i, (g, fb, m) in enumerate(zip(self.gains, feedbacks, measurements)):
            fit = self.fit(m.spectrum, g)
            if open_fit is None:
                open_fit = fit
            metrics = extract_metrics(open_fit, fit, p)
            row = {
                "g_over_gamma": g,
                "gamma_ratio": metrics["gamma_ratio"],
                "r_amplitude": metrics["r_amplitude"],
                "cooling_factor": metrics["cooling_factor"],
                "r_model": noise_reduction_r(p.gamma, fb.gain),
                "width_hz": fit.width,
                "center_hz": fit.center,
            }
            report.add_run(f"g={g:g}", m.spectrum, fit, row, self.overlay(fb, m.spectrum))
            self.post_point_call(i, row)

        floor = report.spectra[0].floor
        if floor > 0:
            report.summary["peak_to_floor_db"] = float(
                to_db((open_fit.peak + open_fit.background) / floor)
            )
        report.summary["r_max"] = float(np.max([row["r_amplitude"] for row in report.metrics]))
        return report


def run_cooling_spectra(config=None, gains=None, verbose=False, log=False, logdir="./Experiments"):
    """
    Cooling spectra at g/Gamma in `gains` (default 0, 2, 6, 19)

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :returns: ScenarioReport
    """
    return CoolingSpectra(config, gains, verbose=verbose, log=log, logdir=logdir).run()
