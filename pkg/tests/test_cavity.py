import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xpmsim.atomic import AtomicParams, dephasing_rates, linear_steady_coherence
from xpmsim.cavity import (
    CavityParams,
    angular_frequency,
    atom_source_term,
    cavity_rhs,
    confocal_waist,
    empty_cavity_steady_state,
    energy_to_photons,
    finesse,
    intensity_lifetime,
    loss_and_phase,
    mode_volume,
    photon_number,
    quality_factor,
    round_trip_time,
)
from xpmsim.constants import HBAR

CAV = CavityParams()


def test_round_trip_time():
    assert round_trip_time(CAV) == pytest.approx(1.668e-10, rel=1e-3)
    assert round_trip_time(CavityParams(length=0.00025)) == pytest.approx(1.668e-12, rel=1e-3)
    assert round_trip_time(CavityParams(length=0.05)) == pytest.approx(2 * round_trip_time(CAV))


def test_mirror_defaults_are_high_finesse():
    assert CAV.r_mirror == 0.9995
    assert CAV.t_mirror == 0.0316
    assert CAV.r_mirror**2 + CAV.t_mirror**2 == pytest.approx(1.0, abs=1e-4)


def test_zero_coherence_gives_no_source():
    assert atom_source_term(0j, 1.2e-30, 1e17, 2.2e15, 1.67e-10) == 0


def test_absorptive_coherence_damps_field():
    E = 3.0
    xE = atom_source_term(0.01j, 7.6e-30, 1e17, angular_frequency(823e-9), round_trip_time(CAV))
    x = xE / E
    assert x.real < 0
    assert x.imag == 0


def test_source_term_requires_positive_tau():
    with pytest.raises(ValueError):
        atom_source_term(0.1j, 1e-30, 1e16, 1e15, 0.0)


@pytest.mark.parametrize("Delta", [2 * math.pi * 50e6, -2 * math.pi * 800e6, 3e7])
def test_weak_cw_phase_to_loss_ratio(Delta):
    atom = AtomicParams()
    g10 = dephasing_rates(atom)[0]
    E = 10.0
    R = atom.mu10 * E / HBAR
    coh = linear_steady_coherence(R, Delta, g10)
    tau = round_trip_time(CAV)
    xE = atom_source_term(coh, atom.mu10, 1e17, angular_frequency(atom.lambda_c), tau)
    beta, phi = loss_and_phase(xE, E, tau)
    assert phi / beta == pytest.approx(-Delta / g10, rel=1e-6)


def test_loss_and_phase_below_floor():
    assert loss_and_phase(1e-20j, 0.0, 1e-10) is None


def test_empty_cavity_steady_state_is_fixed_point():
    E_in = 2.0 + 1.0j
    E_ss = empty_cavity_steady_state(E_in, CAV)
    assert abs(E_ss) / abs(E_in) == pytest.approx(31.6, rel=2e-3)
    assert abs(cavity_rhs(E_ss, E_in, 0j, CAV)) < 1e-9 * abs(E_ss) / round_trip_time(CAV)


def test_empty_cavity_is_at_rest():
    assert cavity_rhs(0j, 0j, 0j, CAV) == 0


def test_free_decay_lifetime():
    tau_ph = intensity_lifetime(CAV)
    assert tau_ph == pytest.approx(83e-9, rel=0.01)
    # RK4 on the field ODE; intensity must fall by 1/e after one lifetime
    n = 20000
    dt = tau_ph / n
    E = 1.0 + 0j
    f = lambda e: cavity_rhs(e, 0j, 0j, CAV)  # noqa: E731
    for _ in range(n):
        k1 = f(E)
        k2 = f(E + 0.5 * dt * k1)
        k3 = f(E + 0.5 * dt * k2)
        k4 = f(E + dt * k3)
        E += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert abs(E) ** 2 == pytest.approx(math.exp(-1), rel=1e-6)


def test_exact_exponential_matches_linearised_for_small_exponent():
    E = 5.0 + 0j
    xE = (-1e-6 + 2e-6j) * E
    lin = cavity_rhs(E, 0j, xE, CAV)
    ex = cavity_rhs(E, 0j, xE, CAV, exact=True)
    assert abs(lin - ex) <= 1e-5 * abs(lin)


def test_phase_disabled_keeps_only_loss():
    E = 2.0 + 0j
    xE = (-1e-3 + 5e-3j) * E
    d = cavity_rhs(E, 0j, xE, CAV, phase_enabled=False)
    expected = cavity_rhs(E, 0j, -1e-3 * E, CAV)
    assert d == pytest.approx(expected, rel=1e-9)


def test_confocal_waist():
    assert confocal_waist(0.025, 823e-9) == pytest.approx(57.2e-6, rel=2e-3)
    assert confocal_waist(0.0025, 823e-9) == pytest.approx(18.1e-6, rel=2e-3)


@given(st.floats(1e-4, 1.0), st.floats(1.1, 100.0))
def test_waist_scales_as_sqrt_length(L, k):
    assert confocal_waist(k * L, 823e-9) == pytest.approx(math.sqrt(k) * confocal_waist(L, 823e-9))


def test_mode_volume():
    assert mode_volume(57.2e-6, 0.025) == pytest.approx(6.4e-11, rel=5e-3)


def test_finesse_lifetime_quality():
    assert finesse(CAV) == pytest.approx(3.14e3, rel=2e-3)
    assert intensity_lifetime(CAV) == pytest.approx(8.34e-8, rel=2e-3)
    assert quality_factor(CAV, 853e-9) == pytest.approx(1.84e8, rel=5e-3)


def test_quality_factor_finesse_identity():
    g = CAV.round_trip_gain
    lam = 853e-9
    assert quality_factor(CAV, lam) == pytest.approx(2 * CAV.length / lam * finesse(CAV) / math.sqrt(g),
                                                     rel=1e-12)


def test_lossless_mirror_rejected_for_derived_quantities():
    with pytest.raises(ValueError):
        finesse(CavityParams(r_mirror=1.0 - 1e-18, t_mirror=1e-9))


def test_energy_to_photons():
    assert energy_to_photons(4.5e-15, 823e-9) == pytest.approx(18644, rel=1e-3)


@given(st.floats(1e-3, 1e6))
def test_photon_number_scales_with_intensity(E):
    w = angular_frequency(853e-9)
    V = mode_volume(60e-6, 0.025)
    assert photon_number(math.sqrt(2) * E, V, w) == pytest.approx(2 * photon_number(E, V, w))


def test_cavity_params_invariants():
    for kw in (dict(length=0.0), dict(r_mirror=1.5), dict(t_mirror=-0.1), dict(waist=0.0)):
        with pytest.raises(ValueError):
            CavityParams(**kw)
    with pytest.warns(RuntimeWarning):
        CavityParams(r_mirror=0.9, t_mirror=0.9)
