from dataclasses import asdict

import numpy as np

from OM_Lib.models import BackgroundModel, FeedbackConfig, ReadoutParams
from OM_Lib.Simulation.langevin.actuator import ActuatorModel


class BaseSimulator:
    """
    Basic implementation of a simulated mirror read out by a cavity and driven by a feedback loop

    :param oscillator (OscillatorParams): Mechanical mode
    :param readout (ReadoutParams): Cavity readout and shot-noise floor
    :param feedback (FeedbackConfig): Feedback loop
    :param actuator (ActuatorModel): Radiation-pressure actuator; a linear one built from
        the loop when None
    :param config (SimConfig): Time grid, scans and seed
    :param background (BackgroundModel): Background added to the sensor record
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    def __init__(
        self,
        oscillator,
        readout=None,
        feedback=None,
        actuator=None,
        config=None,
        background=None,
        verbose=False,
        log=False,
        logdir="./Experiments",
    ):
        self.oscillator = oscillator
        self.readout = readout if readout is not None else ReadoutParams()
        self.feedback = (
            feedback
            if feedback is not None
            else FeedbackConfig(filter_center=oscillator.omega_m, enabled=False)
        )
        self.actuator = (
            actuator
            if actuator is not None
            else ActuatorModel.from_feedback(self.feedback, saturate=False)
        )
        self.config = config
        self.background = background if background is not None else BackgroundModel()
        self.verbose = verbose
        self.log = log
        self.logdir = logdir

        if self.log:
            from torch.utils.tensorboard import SummaryWriter

            self.writer = SummaryWriter(logdir)

    def simulate(self):
        """
        Function that runs the simulation and returns a Trajectory
        """

        raise NotImplementedError

    def post_scan_call(self, scan, x_block):
        """
        Called after every scan with the displacement record of that scan

        :param scan (int): Index of the scan
        :param x_block (np.ndarray): Displacement record of the scan
        """

        if self.log:
            self.writer.add_scalar("Scan variance/x", float(np.var(x_block)), scan)

    def get_parameters(self):
        """
        Print and return the parameter bundles of the run
        """

        params = {
            "oscillator": asdict(self.oscillator),
            "readout": asdict(self.readout),
            "feedback": asdict(self.feedback),
            "actuator": asdict(self.actuator),
            "background": asdict(self.background),
            "simulation": asdict(self.config) if self.config is not None else {},
        }
        if self.verbose:
            print("-" * 80)
            for section, values in params.items():
                print(f"{section}: {values}")
        return params
