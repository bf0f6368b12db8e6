"""CODATA 2018 constants used throughout the package (SI units)."""

from dataclasses import dataclass

__all__ = ["Constants", "CODATA2018", "HBAR", "G", "C", "K_B", "AMU"]


@dataclass(frozen=True)
class Constants:
    hbar: float  # J s
    G: float  # m^3 kg^-1 s^-2
    c: float  # m / s
    k_B: float  # J / K
    amu: float  # kg


CODATA2018 = Constants(
    hbar=1.054571817e-34,
    G=6.67430e-11,
    c=299792458.0,
    k_B=1.380649e-23,
    amu=1.66053906660e-27,
)

HBAR = CODATA2018.hbar
G = CODATA2018.G
C = CODATA2018.c
K_B = CODATA2018.k_B
AMU = CODATA2018.amu
