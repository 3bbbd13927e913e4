"""Lattice laboratory for near-critical planar Ising interfaces.

Builds discrete domains, samples the critical Ising model with boundary
arcs and a vanishing external field, traces the spin interface, extracts
Loewner driving functions, and evaluates the explicit interface reweighting
built from Green's functions and conformal radii.
"""

from ._util import BETA_C, P_C

__all__ = ["BETA_C", "P_C"]
__version__ = "0.1.0"
