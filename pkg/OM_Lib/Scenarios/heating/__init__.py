from .heating import Heating, run_heating
