import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qong.model import (
    DEG_PER_HOUR,
    DomainError,
    ModelParams,
    ResonatorParams,
    angular_frequency,
    calibrated_chi,
    chi_from_parametric_threshold,
    nonlinear_coupling,
    omega_min_from_delta,
    parametric_threshold_power,
    photon_flux,
    quasi_phase_matched_chi2,
    rates_from_quality,
    sagnac_shift,
    second_harmonic_design,
)

HBAR = 1.054571817e-34
C = 299_792_458.0

# frozen hand evaluations
OMEGA1 = 2 * math.pi * C / 1590e-9  # 1.18471e15
SAGNAC_100 = 17.42  # rad/s at 100 deg/h, R = 20 mm, n0 = 2.2


def test_angular_frequency_examples():
    assert angular_frequency(1590e-9) == pytest.approx(1.1853e15, rel=1e-3)
    assert angular_frequency(795e-9) == 2 * angular_frequency(1590e-9)
    assert angular_frequency(1.0) == pytest.approx(2 * math.pi * C)
    with pytest.raises(DomainError):
        angular_frequency(0.0)


def test_rates_from_quality():
    k, g = rates_from_quality(OMEGA1, 5e6, 1e7)
    assert g == pytest.approx(1.1853e8, rel=1e-3)
    k, g = rates_from_quality(OMEGA1, 1e7, 1e7)
    assert k == g
    k2, _ = rates_from_quality(2 * OMEGA1, 5.462e5, 1e6)
    assert k2 == pytest.approx(4.340e9, rel=1e-3)
    with pytest.raises(DomainError):
        rates_from_quality(OMEGA1, 0.5, 1e7)


def test_sagnac_shift():
    assert sagnac_shift(0.0, 0.02, 1590e-9, 2.2) == 0.0
    d = sagnac_shift(100 * DEG_PER_HOUR, 0.02, 1590e-9, 2.2)
    assert d == pytest.approx(SAGNAC_100, rel=1e-3)
    assert sagnac_shift(1.0, 0.04, 1590e-9, 2.2) == pytest.approx(2 * sagnac_shift(1.0, 0.02, 1590e-9, 2.2))
    assert sagnac_shift(-1.0, 0.02, 1590e-9, 2.2) < 0


def test_photon_flux():
    assert photon_flux(0.0, OMEGA1) == 0.0
    assert photon_flux(23.507e-3, 2 * OMEGA1) == pytest.approx(9.405e16, rel=1e-3)
    assert photon_flux(0.945e-6, OMEGA1) == pytest.approx(7.559e12, rel=1e-3)
    with pytest.raises(DomainError):
        photon_flux(-1.0, OMEGA1)


def test_omega_min_from_delta():
    assert omega_min_from_delta(0.0, 0.02, 1590e-9, 2.2) == (0.0, 0.0)
    _, deg = omega_min_from_delta(SAGNAC_100, 0.02, 1590e-9, 2.2)
    assert deg == pytest.approx(100.0, rel=1e-3)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False), st.floats(1e-3, 1.0), st.floats(1.0, 4.0))
def test_sagnac_round_trip(omega, R, n0):
    d = sagnac_shift(omega, R, 1590e-9, n0)
    back, _ = omega_min_from_delta(abs(d), R, 1590e-9, n0)
    assert back == pytest.approx(abs(omega), rel=1e-12, abs=1e-300)


def _coupling(chi2=30e-12, zeta=1.18e6, R=0.02):
    eps = 2.2 ** 2
    return nonlinear_coupling(chi2, zeta, R, OMEGA1, eps, eps)


def test_nonlinear_coupling_with_poled_susceptibility():
    # first-order quasi phase matching of d = 30 pm/V
    chi = _coupling(chi2=quasi_phase_matched_chi2(30e-12))
    assert chi == pytest.approx(1.26e6, rel=0.15)


def test_nonlinear_coupling_bare_susceptibility_is_low():
    # without the poling factor the rate comes out ~21% below 1.26e6
    assert _coupling() == pytest.approx(0.99e6, rel=0.01)


def test_nonlinear_coupling_scalings():
    assert _coupling(zeta=0.0) == 0.0
    assert _coupling(R=0.08) == pytest.approx(_coupling(R=0.02) / 2)
    assert _coupling(zeta=2e6) > _coupling(zeta=1e6)
    assert _coupling(chi2=40e-12) > _coupling(chi2=30e-12)
    assert _coupling(R=0.03) < _coupling(R=0.02)


def test_threshold_inversion_round_trip():
    p = second_harmonic_design()
    chi = chi_from_parametric_threshold(14.05e-3, p)
    assert parametric_threshold_power(p.updated(chi=chi)) == pytest.approx(14.05e-3, rel=1e-12)
    assert calibrated_chi() == pytest.approx(1.2622e6, rel=1e-4)


def test_params_validation_and_update():
    with pytest.raises(DomainError):
        ResonatorParams(radius_R=0.0)
    with pytest.raises(DomainError):
        ResonatorParams(beta1=-1.0)
    with pytest.raises(DomainError):
        ModelParams().updated(P1=-1.0)
    with pytest.raises(KeyError):
        ModelParams().updated(P3=1.0)
    p = ModelParams().updated(P2=1e-3, Qc1=2e6)
    assert p.drive.P2 == 1e-3 and p.coupling.Qc1 == 2e6
    assert p.omega2 == 2 * p.omega1
    assert p.resonator.lambda2 == p.resonator.lambda1 / 2
    d1 = p.updated(Omega=1e-3).delta1
    assert p.updated(Omega=1e-3).rotation.delta2(p.resonator) == 2 * d1
    assert ModelParams().updated(P1=1e-6).drive.scheme == "fundamental"
    assert ModelParams().updated(P2=1e-3).drive.scheme == "second_harmonic"
    assert ModelParams().updated(P1=1e-3, P2=1e-3).drive.scheme == "dual"


def test_unit_audit_power_scaling():
    # the same power given via mW upstream produces identical rates and inputs
    a = ModelParams().updated(P2=23.507e-3)
    b = ModelParams().updated(P2=23.507 * 1e-3)
    assert a.input_amplitudes() == b.input_amplitudes()
