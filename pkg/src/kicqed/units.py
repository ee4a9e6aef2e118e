"""Physical constants and unit conversions.

Boundary values use nH, fF, GHz and flux in units of Phi_0; everything inside the
matrix code is SI.
"""
from scipy import constants as _c

h = _c.h
hbar = _c.hbar
e = _c.e
kB = _c.k
Phi0 = h / (2 * e)

nH = 1e-9
fF = 1e-15
aF = 1e-18
GHz = 1e9
MHz = 1e6


def inductive_energy_GHz(L_nH: float) -> float:
    """E_L = Phi_0^2 / (4 pi^2 L), returned as E_L/h in GHz."""
    from math import pi

    return Phi0**2 / (4 * pi**2 * L_nH * nH) / h / GHz
