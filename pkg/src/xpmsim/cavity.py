"""Fabry-Perot cavity: field round-trip dynamics and derived mode quantities.

Mirror convention: ``r_mirror`` is the per-mirror amplitude reflectance that
enters the round trip squared, ``t_mirror`` the amplitude transmission that
couples the incident field in. The atomic medium enters each round trip
through a complex exponent ``x = (-beta + i phi) tau``. Everything downstream
works with the product ``x E`` so that no quantity is divided by the field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba as nb
import numpy as np

from xpmsim.constants import C, EPS0, H, HBAR

FIELD_FLOOR = 1e-12  # V/m


@dataclass(frozen=True)
class CavityParams:
    length: float = 0.025
    r_mirror: float = 0.9995
    t_mirror: float = 0.0316
    waist: float = 60e-6

    def __post_init__(self):
        if not 0 < self.r_mirror < 1:
            raise ValueError(f"r_mirror must lie in (0, 1), got {self.r_mirror!r}")
        if not 0 < self.t_mirror < 1:
            raise ValueError(f"t_mirror must lie in (0, 1), got {self.t_mirror!r}")
        if not self.length > 0:
            raise ValueError("length must be > 0")
        if not self.waist > 0:
            raise ValueError("waist must be > 0")
        if abs(self.r_mirror**2 + self.t_mirror**2 - 1) >= 1e-3:
            warnings.warn("mirror coefficients are not lossless (r^2 + t^2 != 1)",
                          RuntimeWarning, stacklevel=2)

    @property
    def round_trip_gain(self) -> float:
        """Round-trip amplitude factor g = r^2."""
        return self.r_mirror**2


@dataclass(frozen=True)
class MediumParams:
    """Metastable number density (m^-3) and control-line Doppler FWHM (Hz)."""

    density: float = 0.0
    doppler_fwhm: float = 440e6

    def __post_init__(self):
        if not (math.isfinite(self.density) and self.density >= 0):
            raise ValueError("density must be >= 0")
        if not (math.isfinite(self.doppler_fwhm) and self.doppler_fwhm >= 0):
            raise ValueError("doppler_fwhm must be >= 0")


def round_trip_time(cav: CavityParams) -> float:
    return 2.0 * cav.length / C


def angular_frequency(wavelength: float) -> float:
    return 2.0 * math.pi * C / wavelength


def source_coefficient(mu: float, density: float, omega: float, tau: float) -> complex:
    """Factor k such that ``x E = k * coherence`` for one transition."""
    return 1j * omega * tau * density * mu / (2.0 * EPS0)


def atom_source_term(coh: complex, mu: float, N: float, omega: float, tau: float) -> complex:
    """Round-trip atomic exponent multiplied by the field, ``x E``.

    With susceptibility ``chi = N coh mu / (eps0 E)`` and ``x = i omega tau chi / 2``
    the field cancels, so the result stays finite as E -> 0.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return source_coefficient(mu, N, omega, tau) * coh


def loss_and_phase(source: complex, E: complex, tau: float,
                   floor: float = FIELD_FLOOR) -> tuple[float, float] | None:
    """Diagnostic (beta, phi) in s^-1 from ``x E``; None below the field floor."""
    if abs(E) <= floor:
        return None
    x = source / E
    return -x.real / tau, x.imag / tau


@nb.njit(cache=True, nogil=True)
def cavity_rhs_core(E, E_in, source, tau, r2, t, phase_enabled, exact):
    if not phase_enabled:
        # keep Re(x) only: project x E onto E, regularised at the field floor
        mag2 = E.real * E.real + E.imag * E.imag + 1e-24
        source = E * ((source * np.conj(E)).real / mag2)
    if exact:
        if abs(E) > 1e-12:
            feedback = (r2 * np.exp(source / E) - 1.0) * E
        else:
            feedback = (r2 - 1.0) * E + r2 * source
    else:
        feedback = (r2 - 1.0) * E + r2 * source
    return (t * E_in + feedback) / tau


def cavity_rhs(E: complex, E_in: complex, source_exponent: complex, cav: CavityParams,
               phase_enabled: bool = True, exact: bool = False) -> complex:
    """Time derivative of the intracavity field amplitude (V/m per s).

    ``source_exponent`` is ``x E`` as returned by :func:`atom_source_term`.
    By default the round-trip exponential is linearised,
    ``r^2 e^x - 1 ~ (r^2 - 1) + r^2 x``; ``exact=True`` evaluates the
    exponential and needs |E| above ``FIELD_FLOOR``.
    """
    return cavity_rhs_core(complex(E), complex(E_in), complex(source_exponent),
                           round_trip_time(cav), cav.round_trip_gain, cav.t_mirror,
                           bool(phase_enabled), bool(exact))


def empty_cavity_steady_state(E_in: complex, cav: CavityParams) -> complex:
    return cav.t_mirror * E_in / (1.0 - cav.round_trip_gain)


def confocal_waist(L: float, wavelength: float) -> float:
    return math.sqrt(L * wavelength / (2.0 * math.pi))


def mode_volume(w0: float, L: float) -> float:
    """Constant-field effective mode volume pi w0^2 L / 4."""
    return math.pi * w0**2 * L / 4.0


def _gain(cav: CavityParams) -> float:
    g = cav.round_trip_gain
    if g >= 1:
        raise ValueError("round-trip gain must be < 1")
    return g


def finesse(cav: CavityParams) -> float:
    g = _gain(cav)
    return math.pi * math.sqrt(g) / (1.0 - g)


def intensity_lifetime(cav: CavityParams) -> float:
    return round_trip_time(cav) / (2.0 * (1.0 - _gain(cav)))


def quality_factor(cav: CavityParams, wavelength: float) -> float:
    return angular_frequency(wavelength) * intensity_lifetime(cav)


def energy_to_photons(pulse_energy: float, wavelength: float) -> float:
    return pulse_energy * wavelength / (H * C)


def photon_number(E: complex, V_eff: float, omega: float) -> float:
    """Intracavity photon number for a uniform field amplitude over V_eff."""
    return EPS0 * abs(E) ** 2 * V_eff / (2.0 * HBAR * omega)


def peak_field_from_pulse(energy: float, duration: float, w0: float) -> float:
    """Incident peak field amplitude of a flat-top pulse of given energy.

    Uses P = energy / duration and P = 1/2 eps0 c |E|^2 (pi w0^2 / 2).
    """
    power = energy / duration
    return math.sqrt(power / (0.5 * EPS0 * C * math.pi * w0**2 / 2.0))


def incident_power(E: np.ndarray | float, w0: float) -> np.ndarray | float:
    return 0.5 * EPS0 * C * np.abs(E) ** 2 * (math.pi * w0**2 / 2.0)
