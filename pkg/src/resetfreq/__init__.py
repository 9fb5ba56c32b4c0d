"""Frequency-domain analysis of closed-loop reset control systems."""

from .model import (ClosedLoopResetSystem, LinearSystem, ResetElement, build_closed_loop,
                    clegg, fore, realize_transfer_function, series, unity)
from .config import load_system, bundled_systems
from .openloop import open_loop_spectrum
from .steadystate import solve_steady_state
from .closedloop import sensitivity_spectrum
from .pseudo import pseudo_point
from .hifreq import approx_spectra, estimate_omega_h
from .stability import assess_stability
from .simulator import PeriodicInput, simulate

__version__ = "0.1.0"

__all__ = [
    "ClosedLoopResetSystem", "LinearSystem", "ResetElement", "build_closed_loop", "clegg",
    "fore", "realize_transfer_function", "series", "unity", "load_system", "bundled_systems",
    "open_loop_spectrum", "solve_steady_state", "sensitivity_spectrum", "pseudo_point",
    "approx_spectra", "estimate_omega_h", "assess_stability", "PeriodicInput", "simulate",
]
