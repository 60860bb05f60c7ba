from .common import BaseScenario, Measurement, ScenarioReport, RunManifest
from .cooling import CoolingSpectra, run_cooling_spectra
from .heating import Heating, run_heating
from .gain_sweep import GainSweep, run_gain_sweep
from .offres import OffResonanceCooling, dip_depth, run_offres_cooling
from .oracle import OracleCheck, run_oracle_check

SCENARIOS = {
    CoolingSpectra.name: CoolingSpectra,
    Heating.name: Heating,
    GainSweep.name: GainSweep,
    OffResonanceCooling.name: OffResonanceCooling,
    OracleCheck.name: OracleCheck,
}
