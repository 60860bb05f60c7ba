from .base_class import BaseScenario, Measurement
from .report import ScenarioReport, RunManifest
