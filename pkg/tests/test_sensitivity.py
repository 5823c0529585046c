import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qong.model import DEG_PER_HOUR, REFERENCE_DESIGNS, ModelParams, second_harmonic_design
from qong.sensitivity import (
    Infeasible,
    SingularCovariance,
    ZeroInformation,
    current_gradient,
    currents,
    evaluate_point,
    fisher_information,
    linear_mdr_closed_form,
    mdr,
)
from qong.steady import operating_point


def linear(**kw):
    base = dict(chi=0.0, beta1=0.0, beta2=0.0, P1=1e-6, P2=0.0, Qc1=5e6)
    base.update(kw)
    return ModelParams().updated(**base)


@pytest.mark.parametrize("scheme", sorted(REFERENCE_DESIGNS))
@pytest.mark.parametrize("convention", ["classical", "input_referred"])
def test_currents_vanish_at_rest(scheme, convention):
    p = REFERENCE_DESIGNS[scheme]()
    i = currents(operating_point(p), p, convention)
    scale = p.detector_constants[1] * max(abs(b) ** 2 for b in p.input_amplitudes())
    assert np.all(np.abs(i) < 1e-9 * scale)


@pytest.mark.parametrize("scheme", sorted(REFERENCE_DESIGNS))
def test_currents_flip_sign_with_rotation(scheme):
    p = REFERENCE_DESIGNS[scheme]()
    a, b = (p.updated(Omega=w) for w in (2e-4, -2e-4))
    ia, ib = currents(operating_point(a), a), currents(operating_point(b), b)
    assert np.allclose(ia, -ib, rtol=1e-8, atol=1e-9 * np.max(np.abs(ia)))


def test_fisher_information_examples():
    assert fisher_information([1.0, 0.0], np.eye(2)).value == pytest.approx(1.0)
    assert fisher_information([1.0, 1.0], np.diag([1.0, 4.0])).value == pytest.approx(1.25)
    S = np.array([[1.0, 0.5], [0.5, 1.0]])
    # g^T S^-1 g with S^-1 = [[4/3, -2/3], [-2/3, 4/3]]
    assert fisher_information([1.0, 1.0], S).value == pytest.approx(4 / 3)
    assert fisher_information([0.0, 0.0], np.eye(2)).value == 0.0
    assert fisher_information([1.0, 0.0], np.diag([1.0, 3.0]), components=(0,)).value == pytest.approx(1.0)


def test_fisher_information_regularizes_nearly_singular_covariance():
    S = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
    res = fisher_information([1.0, -1.0], S)
    assert res.regularized and np.isfinite(res.value)
    with pytest.raises(SingularCovariance):
        fisher_information([1.0, 0.0], np.zeros((2, 2)))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=2),
       st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-0.9, 0.9))
def test_combined_information_dominates_each_current(g, v1, v2, rho):
    S = np.array([[v1, rho * math.sqrt(v1 * v2)], [rho * math.sqrt(v1 * v2), v2]])
    both = fisher_information(g, S).value
    for k in (0, 1):
        assert both >= fisher_information(g, S, components=(k,)).value * (1 - 1e-12) - 1e-12


def test_mdr_at_unit_information():
    p = ModelParams()
    r = p.resonator
    d, om, deg = mdr(1.0, p)
    assert d == 1.0
    assert om == pytest.approx(r.lambda1 * r.index_n0 / (2 * math.pi * r.radius_R), rel=1e-14)
    assert deg == pytest.approx(om / DEG_PER_HOUR)
    with pytest.raises(ZeroInformation):
        mdr(0.0, p)


def test_closed_form_scalings():
    p = linear(Qc1=1e7)
    base = linear_mdr_closed_form(p)[0]
    assert linear_mdr_closed_form(p, power=4e-6)[0] == pytest.approx(base / 2, rel=1e-12)
    # kappa and gamma depend on wavelength only, so R enters as 1/R
    assert linear_mdr_closed_form(p.updated(R=0.04))[0] == pytest.approx(base / 2, rel=1e-12)
    assert linear_mdr_closed_form(p, power=0.945e-6)[1] == pytest.approx(87.4, rel=2e-3)


@pytest.mark.parametrize("Qc1", [2e6, 0.999e7, 1.001e7, 5e7])
def test_engine_matches_closed_form_for_linear_gyro(Qc1):
    p = linear(Qc1=Qc1)
    rep = evaluate_point(p, convention="classical")
    assert rep.omega_min_rad_s == pytest.approx(linear_mdr_closed_form(p)[0], rel=1e-6)


def test_exact_critical_coupling_carries_no_engine_information():
    # the output field, the slope and the noise weights all vanish together;
    # the closed form is the limit approached from either side
    rep = evaluate_point(linear(Qc1=1e7), convention="classical")
    assert rep.reason == "zero_information"


@pytest.mark.parametrize("Qc1", [2e6, 1e7, 5e7])
def test_gradient_matches_analytic_linear_slope(Qc1):
    p = linear(Qc1=Qc1)
    g = current_gradient(p, convention="classical")
    assert g.value[0] == pytest.approx(oracles.linear_gradient(p), rel=1e-5)
    assert g.value[1] == 0.0


def test_engine_quadrupling_power_halves_mdr():
    a = evaluate_point(linear(P1=1e-6), convention="classical").omega_min_rad_s
    b = evaluate_point(linear(P1=4e-6), convention="classical").omega_min_rad_s
    assert b == pytest.approx(a / 2, rel=1e-6)


@pytest.mark.parametrize("scheme", sorted(REFERENCE_DESIGNS))
def test_gradient_is_even_in_rotation(scheme):
    p = REFERENCE_DESIGNS[scheme]()
    ga = current_gradient(p.updated(Omega=1e-4)).value
    gb = current_gradient(p.updated(Omega=-1e-4)).value
    assert np.allclose(ga, gb, rtol=1e-4, atol=1e-6 * np.max(np.abs(ga)))


def test_gradient_insensitive_to_initial_step():
    p = REFERENCE_DESIGNS["dual"]()
    h0 = 1e-3 * (p.kappa[0] + p.gamma[0])
    a = current_gradient(p, h=h0).value
    b = current_gradient(p, h=h0 / 8).value
    assert np.allclose(a, b, rtol=1e-4)


@pytest.mark.parametrize("scale", [0.5, 2.0, 10.0])
def test_mdr_independent_of_responsivity(scale):
    p = REFERENCE_DESIGNS["fundamental"]()
    a = evaluate_point(p).omega_min_rad_s
    b = evaluate_point(p.updated(responsivity=scale * p.detection.responsivity)).omega_min_rad_s
    assert b == pytest.approx(a, rel=1e-10)


def test_below_threshold_second_harmonic_drive_is_infeasible():
    rep = evaluate_point(second_harmonic_design().updated(P2=10e-3))
    assert isinstance(rep, Infeasible)
    assert rep.reason == "below_threshold" and not rep.feasible


def test_undriven_point_and_unknown_convention():
    rep = evaluate_point(second_harmonic_design().updated(P2=0.0))
    assert rep.reason == "undriven"
    with pytest.raises(ValueError):
        evaluate_point(second_harmonic_design(), convention="bogus")


@pytest.mark.parametrize("scheme", sorted(REFERENCE_DESIGNS))
def test_report_is_consistent(scheme):
    rep = evaluate_point(REFERENCE_DESIGNS[scheme]())
    assert rep.feasible
    g, S = rep.current_gradient, rep.covariance
    assert rep.fisher == pytest.approx(float(g @ np.linalg.solve(S, g)), rel=1e-9)
    assert rep.delta_min == pytest.approx(1 / math.sqrt(rep.fisher))
