"""Spatial adiabatic passage of a single atom in three triangular harmonic traps.

Two backends are provided: a three-mode tunneling model (``three_mode``) and a
2D split-operator wavefunction solver (``grid2d``). The ``interferometer``
module builds the split, imprint and recombine protocol on either backend.
"""
from .couplings import CouplingTriple, TrapLayout, coupling_rate, couplings_of, distance_AC
from .pulses import PulseSchedule

__all__ = [
    "CouplingTriple",
    "PulseSchedule",
    "TrapLayout",
    "coupling_rate",
    "couplings_of",
    "distance_AC",
]
__version__ = "0.1.0"
