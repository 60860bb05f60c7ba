from dataclasses import astuple, fields

import numpy as np

from OM_Lib.exceptions import ParameterError
from .spectrum import FitResult, Spectrum

_SPECTRUM_KEYS = {
    "rbw": float,
    "n_averages": int,
    "normalized": lambda v: v == "True",
    "floor": float,
    "floor_included": lambda v: v == "True",
    "units": str,
}


def _read_header(path):
    header = {}
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, sep, value = line[1:].strip().partition(": ")
            if sep:
                header[key] = value
            else:
                header["columns"] = key
    return header


def save_spectrum(s, path):
    """
    Write a spectrum as comma-delimited text, full precision, with its resolution,
    averaging and normalization in the '#' header
    """
    header = "\n".join(
        [
            "OM_Lib spectrum",
            f"rbw: {float(s.rbw)!r}",
            f"n_averages: {int(s.n_averages)}",
            f"normalized: {bool(s.normalized)}",
            f"floor: {float(s.floor)!r}",
            f"floor_included: {bool(s.floor_included)}",
            f"units: {s.units}",
            "convention: single-sided PSD versus frequency in Hz",
            "freq_Hz,psd",
        ]
    )
    np.savetxt(path, np.column_stack((s.freq, s.psd)), delimiter=",", header=header, fmt="%.17g")
    return path


def load_spectrum(path):
    """
    Read a spectrum written by save_spectrum
    """
    header = _read_header(path)
    missing = [key for key in ("rbw", "n_averages") if key not in header]
    if missing:
        raise ParameterError(f"{path} is not a spectrum file (missing {missing})")
    kwargs = {key: parse(header[key]) for key, parse in _SPECTRUM_KEYS.items() if key in header}
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return Spectrum(data[:, 0], data[:, 1], **kwargs)


def save_fit(fit, path):
    """
    Write a FitResult as one comma-delimited row under a '#' header of field names
    """
    names = [f.name for f in fields(FitResult)]
    row = np.array([float(v) for v in astuple(fit)])[None, :]
    header = "\n".join(
        [
            "OM_Lib Lorentzian fit",
            "convention: center and width in Hz, area in PSD units x Hz",
            ",".join(names),
        ]
    )
    np.savetxt(path, row, delimiter=",", header=header, fmt="%.17g")
    return path


def load_fit(path):
    """
    Read a FitResult written by save_fit
    """
    header = _read_header(path)
    names = header.get("columns", "").split(",")
    values = np.loadtxt(path, delimiter=",", ndmin=2)[0]
    if len(names) != len(values):
        raise ParameterError(f"{path} is not a fit file")
    kwargs = {name: float(value) for name, value in zip(names, values)}
    kwargs["converged"] = bool(kwargs["converged"])
    kwargs["n_evaluations"] = int(kwargs["n_evaluations"])
    return FitResult(**kwargs)
