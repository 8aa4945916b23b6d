"""Three-level ladder atom |0> -> |1> -> |2> in the rotating frame.

The equations of motion are evaluated by a single numba-compiled core,
:func:`bloch_rhs_core`, which the time integrator calls directly. The
dataclass-level :func:`bloch_rhs` is a thin wrapper over the same core.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba as nb
import numpy as np

POPULATION_TOL = 1e-9
COHERENCE_TOL = 1e-6


@dataclass(frozen=True)
class AtomicParams:
    """Decay rates (s^-1), dipole moments (C m) and wavelengths (m)."""

    gamma1: float = 3.2e7
    gamma2: float = 1.4e7
    gamma0: float = 0.0
    Gamma10: float = 2.9e7
    Gamma21: float = 6.5e4
    mu10: float = 7.6e-30
    mu21: float = 1.2e-30
    lambda_c: float = 823e-9
    lambda_p: float = 853e-9

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "gamma0", "Gamma10", "Gamma21"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a finite rate >= 0, got {value!r}")
        if self.Gamma10 > self.gamma1:
            raise ValueError("Gamma10 cannot exceed gamma1")
        if self.Gamma21 > self.gamma2:
            raise ValueError("Gamma21 cannot exceed gamma2")
        for name in ("mu10", "mu21", "lambda_c", "lambda_p"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class DensityMatrix:
    """Populations and lower-triangle coherences of the 3x3 density matrix.

    Only sigma_10, sigma_21 and sigma_20 are stored; the upper triangle is
    their conjugate, so Hermiticity holds by construction. The same type is
    used for time derivatives.
    """

    pop0: float = 0.0
    pop1: float = 0.0
    pop2: float = 0.0
    coh10: complex = 0j
    coh21: complex = 0j
    coh20: complex = 0j

    @property
    def trace(self) -> float:
        return self.pop0 + self.pop1 + self.pop2

    def as_tuple(self) -> tuple:
        return (self.pop0, self.pop1, self.pop2, self.coh10, self.coh21, self.coh20)

    def __add__(self, other: DensityMatrix) -> DensityMatrix:
        return DensityMatrix(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def __mul__(self, scale: float) -> DensityMatrix:
        return DensityMatrix(*(scale * a for a in self.as_tuple()))

    __rmul__ = __mul__

    def check_physical(self, tol: float = POPULATION_TOL) -> None:
        """Raise if populations leave [-tol, 1 + tol]; warn on coherence bound."""
        pops = (self.pop0, self.pop1, self.pop2)
        if any(p < -tol or p > 1 + tol for p in pops) or self.trace > 1 + tol:
            raise ValueError(f"unphysical populations {pops}")
        pairs = ((self.coh10, self.pop1, self.pop0),
                 (self.coh21, self.pop2, self.pop1),
                 (self.coh20, self.pop2, self.pop0))
        for coh, pj, pi in pairs:
            if abs(coh) ** 2 > pj * pi + COHERENCE_TOL:
                warnings.warn("coherence exceeds sqrt(pop_i pop_j)", RuntimeWarning, stacklevel=2)
                break


@dataclass(frozen=True)
class Detunings:
    """One-photon (Delta) and two-photon (delta) detunings in rad/s."""

    Delta: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.Delta) and math.isfinite(self.delta)):
            raise ValueError("detunings must be finite")


@dataclass(frozen=True)
class DriveAmplitudes:
    """Couplings R10 = mu10 E_c / hbar and R21 = mu21 E_p / hbar (rad/s)."""

    R10: complex = 0j
    R21: complex = 0j


def dephasing_rates(params: AtomicParams) -> tuple[float, float, float]:
    """Return (gamma10, gamma21, gamma20), each the mean of the two level rates."""
    g0, g1, g2 = params.gamma0, params.gamma1, params.gamma2
    return 0.5 * (g1 + g0), 0.5 * (g2 + g1), 0.5 * (g2 + g0)


def ground_state() -> DensityMatrix:
    return DensityMatrix(pop0=1.0)


@nb.njit(cache=True, nogil=True)
def bloch_rhs_core(p0, p1, p2, c10, c21, c20, R10, R21, Delta, delta,
                   g0, g1, g2, G10, G21):
    g10 = 0.5 * (g1 + g0)
    g21 = 0.5 * (g2 + g1)
    g20 = 0.5 * (g2 + g0)
    # drive terms shared between the population lines
    a10 = 1j * R10 * np.conj(c10) - 1j * np.conj(R10) * c10
    a21 = 1j * R21 * np.conj(c21) - 1j * np.conj(R21) * c21
    dp0 = G10 * p1 - a10.real
    dp1 = -g1 * p1 + G21 * p2 + a10.real - a21.real
    dp2 = -g2 * p2 + a21.real
    dc10 = (-g10 * c10 + 1j * Delta * c10 - 1j * R10 * p1 + 1j * R10 * p0
            + 1j * np.conj(R21) * c20)
    dc21 = (-g21 * c21 + 1j * (delta - Delta) * c21 - 1j * R21 * p2 + 1j * R21 * p1
            - 1j * np.conj(R10) * c20)
    dc20 = -g20 * c20 + 1j * delta * c20 + 1j * R21 * c10 - 1j * R10 * c21
    return dp0, dp1, dp2, dc10, dc21, dc20


def bloch_rhs(state: DensityMatrix, drives: DriveAmplitudes, det: Detunings,
              params: AtomicParams) -> DensityMatrix:
    """Time derivative of ``state`` under the ladder master equation.

    The result is returned as a :class:`DensityMatrix` holding derivatives
    (populations real, coherences complex). It is linear in ``state`` for
    fixed drives.
    """
    out = bloch_rhs_core(
        float(state.pop0), float(state.pop1), float(state.pop2),
        complex(state.coh10), complex(state.coh21), complex(state.coh20),
        complex(drives.R10), complex(drives.R21), float(det.Delta), float(det.delta),
        params.gamma0, params.gamma1, params.gamma2, params.Gamma10, params.Gamma21,
    )
    return DensityMatrix(*out)


def linear_steady_coherence(R10: complex, Delta: float, gamma10: float) -> complex:
    """Weak-drive steady state of sigma_10 with the atom held in |0>."""
    if not gamma10 > 0:
        raise ValueError(f"gamma10 must be > 0, got {gamma10!r}")
    return 1j * R10 / (gamma10 - 1j * Delta)
