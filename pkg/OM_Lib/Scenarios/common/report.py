import json
import os
import re
from dataclasses import asdict, dataclass, field
from datetime import datetime

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

import OM_Lib
from OM_Lib.config import dump_config
from OM_Lib.Spectral import save_fit, save_spectrum

CONVENTIONS = {
    "psd": "single-sided, per Hz",
    "frequency": "Hz",
    "gain": "g/Gamma",
    "angular quantities": "rad/s",
}


def _slug(label):
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", label).strip("_")


@dataclass
class RunManifest:
    """
    Everything needed to reproduce a scenario run

    :param scenario (str): Scenario name
    :param config (str): Fully resolved configuration (INI text)
    :param seeds (list): Seeds of every simulated point
    :param version (str): Library version
    :param started (str): ISO timestamp of the start of the run
    :param finished (str): ISO timestamp of the end of the run, empty while running
    :param outputs (list): Files written by the run
    :param conventions (dict): Units and sidedness of the written data
    """

    scenario: str
    config: str
    seeds: list = field(default_factory=list)
    version: str = OM_Lib.__version__
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    @classmethod
    def create(cls, scenario, cfg):
        return cls(
            scenario=scenario,
            config=dump_config(cfg),
            seeds=[int(cfg.simulation.seed)],
            started=datetime.now().isoformat(timespec="seconds"),
        )

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
        with open(os.path.join(out_dir, "config.ini"), "w") as f:
            f.write(self.config)
        return path


@dataclass
class ScenarioReport:
    """
    Outcome of a scenario: measured spectra and fits, the metrics table, analytic
    overlays and the comparison with the closed-loop model

    :param name (str): Scenario name
    :param spectra (list): Measured Spectrum per run
    :param labels (list): Label of each run
    :param fits (list): FitResult per run (None where no fit applies)
    :param metrics (list): One dict per run, the rows of the metrics table
    :param overlays (dict): Analytic Spectrum per label
    :param curves (dict): Model curves (pandas DataFrame) per name
    :param oracle_deviation (dict): Relative deviation summary against the model
    :param summary (dict): Scenario-level results
    :param manifest (RunManifest): Reproduction record
    """

    name: str
    spectra: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    overlays: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    oracle_deviation: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    manifest: RunManifest = None

    def add_run(self, label, spectrum, fit=None, row=None, overlay=None):
        self.labels.append(label)
        self.spectra.append(spectrum)
        self.fits.append(fit)
        if row is not None:
            self.metrics.append(row)
        if overlay is not None:
            self.overlays[label] = overlay

    def to_dataframe(self):
        """
        Metrics table, one row per run
        """
        return pd.DataFrame(self.metrics)

    def save(self, out_dir, plot=False):
        """
        Write one spectrum file per run, the fits, metrics.csv, the analytic overlays
        and manifest.json into out_dir

        :param out_dir (str): Report directory, created if needed
        :param plot (bool): Also write PNG figures of the spectra and metrics
        :returns: List of written paths
        """
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for i, (label, spectrum, fit) in enumerate(zip(self.labels, self.spectra, self.fits)):
            stem = f"{i:02d}_{_slug(label)}"
            paths.append(save_spectrum(spectrum, os.path.join(out_dir, f"spectrum_{stem}.txt")))
            if fit is not None:
                paths.append(save_fit(fit, os.path.join(out_dir, f"fit_{stem}.txt")))
        for label, overlay in self.overlays.items():
            paths.append(save_spectrum(overlay, os.path.join(out_dir, f"overlay_{_slug(label)}.txt")))
        for name, curve in self.curves.items():
            path = os.path.join(out_dir, f"overlay_{_slug(name)}.txt")
            curve.to_csv(path, index=False, float_format="%.17g")
            paths.append(path)

        path = os.path.join(out_dir, "metrics.csv")
        self.to_dataframe().to_csv(path, index=False, float_format="%.17g")
        paths.append(path)
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w") as f:
            json.dump(
                {"summary": self.summary, "oracle_deviation": self.oracle_deviation},
                f,
                indent=2,
                sort_keys=True,
                default=_json_default,
            )
        paths.append(path)

        if plot:
            paths.append(self.plot_spectra(os.path.join(out_dir, "spectra.png")))
            if self.metrics:
                paths.append(self.plot_metrics(os.path.join(out_dir, "metrics.png")))

        if self.manifest is not None:
            self.manifest.outputs = [os.path.basename(p) for p in paths]
            self.manifest.finished = datetime.now().isoformat(timespec="seconds")
            paths.append(self.manifest.write(out_dir))
        return paths

    def plot_spectra(self, path=None):
        """
        Measured spectra on a log scale, analytic overlays dashed
        """
        fig, ax = plt.subplots()
        for label, spectrum in zip(self.labels, self.spectra):
            ax.semilogy(spectrum.freq, spectrum.psd, label=label)
            if label in self.overlays:
                overlay = self.overlays[label]
                ax.semilogy(overlay.freq, overlay.psd, "k--", linewidth=0.8)
        ax.set_xlabel("Frequency (Hz)")
        if self.spectra:
            ax.set_ylabel(f"PSD ({self.spectra[0].unit_label})")
        ax.legend()
        return _finish(fig, path)

    def plot_metrics(self, path=None):
        """
        Every metric column against g/Gamma
        """
        df = self.to_dataframe()
        fig, ax = plt.subplots()
        x = df["g_over_gamma"] if "g_over_gamma" in df else np.arange(len(df))
        for column in df.columns:
            if column != "g_over_gamma" and np.issubdtype(df[column].dtype, np.number):
                ax.plot(x, df[column], "o-", label=column)
        ax.set_xlabel("g/Gamma")
        ax.legend()
        return _finish(fig, path)


def _finish(fig, path):
    if path is None:
        return fig
    fig.savefig(path)
    plt.close(fig)
    return path


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")
