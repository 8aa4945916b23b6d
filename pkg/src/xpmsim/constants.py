"""CODATA constants used throughout the package (SI units)."""

from dataclasses import dataclass

import scipy.constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = _sc.c
    hbar: float = _sc.hbar
    h: float = _sc.h
    eps0: float = _sc.epsilon_0


CONSTANTS = PhysicalConstants()

C = CONSTANTS.c
HBAR = CONSTANTS.hbar
H = CONSTANTS.h
EPS0 = CONSTANTS.eps0
