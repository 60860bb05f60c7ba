from .gain_sweep import GainSweep, run_gain_sweep
