from dataclasses import replace

import numpy as np

from OM_Lib.exceptions import ParameterError
from OM_Lib.models import check_stable, effective_q, thermal_variance
from OM_Lib.Simulation import LangevinSimulator, ring_down_estimate
from OM_Lib.Spectral import extract_metrics
from OM_Lib.Scenarios.common import BaseScenario


class Heating(BaseScenario):
    """
    Negative gain: the loop cancels part of the mechanical damping, the peak narrows
    and rises and the effective quality factor grows as Gamma/(Gamma + g).

    Gamma_fb is measured twice: by a Lorentzian fit of the heated spectrum and from
    the free decay of a coherent excitation.

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :param gains (list): g/Gamma of the heated runs, each in (-1, 0];
        (analysis.heating_gain,) when None
    :param background (BackgroundModel): Background of the sensor record; none when None
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    name = "heating"

    def default_gains(self):
        return (self.config.analysis.heating_gain,)

    def ring_down(self, feedback, decay_times=3.0):
        """
        Decay rate of a coherent excitation of the noiseless mode under the loop
        """
        p = self.oscillator
        cold = p.with_temperature(0.0)
        gamma_fb = p.gamma + feedback.gain
        x0 = np.sqrt(thermal_variance(p)) if p.temperature > 0 else 1e-12
        sim = replace(
            self.config.simulation,
            n_samples=int(np.ceil(2.0 * decay_times / (gamma_fb * self.config.simulation.dt))),
            n_scans=1,
            x0=x0,
            v0=0.0,
            burn_in=0,
            sensing="ideal",
            record_force=False,
        )
        traj = LangevinSimulator(
            cold,
            self.config.readout.with_floor(0.0),
            feedback,
            self.config.actuator,
            sim,
        ).simulate()
        return ring_down_estimate(traj)

    def run(self):
        for g in self.gains:
            check_stable(self.oscillator.gamma, g * self.oscillator.gamma)
            if g > 0:
                raise ParameterError(f"heating gains must not be positive, got {g}")

        if self.verbose:
            print(f"Running scenario {self.name}... ")
            print("-" * 80)

        report = self.new_report()
        open_fb = self.feedback_for(0.0)
        band = self.analysis_band(0.0)
        open_m = self.measure(open_fb, band=band)
        open_fit = self.fit(open_m.spectrum, 0.0)
        report.add_run(
            "g=0",
            open_m.spectrum,
            open_fit,
            self._row(0.0, open_fit, open_fit, self.ring_down(open_fb)),
            self.overlay(open_fb, open_m.spectrum),
        )
        self.post_point_call(0, report.metrics[-1])

        for i, g in enumerate(self.gains, start=1):
            fb = self.feedback_for(g)
            sim = self.scan_config(g, self.config.analysis.heating_scans)
            m = self.measure(fb, simulation=sim, band=band)
            fit = self.fit(m.spectrum, g)
            row = self._row(g, open_fit, fit, self.ring_down(fb))
            report.add_run(f"g={g:g}", m.spectrum, fit, row, self.overlay(fb, m.spectrum))
            self.post_point_call(i, row)

        last = report.metrics[-1]
        report.summary.update(
            {
                "gamma_fb_over_gamma": last["gamma_ratio"],
                "q_eff_over_q": last["q_eff_over_q"],
                "ring_down_gamma_fb_over_gamma": last["ring_down_ratio"],
            }
        )
        return report

    def _row(self, g, open_fit, fit, ring_down_rate):
        p = self.oscillator
        metrics = extract_metrics(open_fit, fit, p)
        return {
            "g_over_gamma": g,
            "gamma_ratio": metrics["gamma_ratio"],
            "q_eff_over_q": 1.0 / metrics["gamma_ratio"],
            "q_eff": fit.quality_factor,
            "q_eff_model": effective_q(p, g * p.gamma),
            "peak_ratio": fit.peak / open_fit.peak,
            "ring_down_ratio": ring_down_rate / p.gamma,
            "cooling_factor": metrics["cooling_factor"],
        }


def run_heating(config=None, gains=None, verbose=False, log=False, logdir="./Experiments"):
    """
    Heating run at g/Gamma = analysis.heating_gain (default -0.98)

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :returns: ScenarioReport
    """
    return Heating(config, gains, verbose=verbose, log=log, logdir=logdir).run()
