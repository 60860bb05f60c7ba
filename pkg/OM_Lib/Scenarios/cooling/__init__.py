from .cooling import CoolingSpectra, run_cooling_spectra
