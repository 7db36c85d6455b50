import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpfseries.baths import (
    AccuracyError,
    ClassicalNoiseModel,
    ModelError,
    QuantumBathModel,
    closed_form_amplitude,
    correlation_eval,
    decoherence_factor,
    default_propagator,
    dephasing_propagator,
    finite_T_propagator,
    solve_volterra_amplitude,
    zero_T_decay_propagator,
)
from cpfseries.operators import SuperOperator, ValidationError, is_completely_positive


def test_correlation_values():
    m = QuantumBathModel(1.0, 0.125, nbar=0.2)
    assert correlation_eval(m, "chi_down", 0.0) == pytest.approx(1.2 * 4.0)
    assert correlation_eval(m, "chi_up", 0.0) == pytest.approx(0.2 * 4.0)
    assert correlation_eval(m, "down", 0.125) == pytest.approx(1.2 * 4.0 / math.e)
    c = ClassicalNoiseModel(1.0, 0.05)
    assert correlation_eval(c, "chi", 0.0) == pytest.approx(10.0)
    assert correlation_eval(c, "chi", -0.05) == correlation_eval(c, "chi", 0.05)


def test_zero_temperature_has_no_upward_correlation():
    assert correlation_eval(QuantumBathModel(1.0, 0.5), "chi_up", 0.3) == 0.0


def test_unknown_correlation_kind():
    with pytest.raises(ModelError):
        correlation_eval(ClassicalNoiseModel(1.0, 0.1), "up", 0.0)
    with pytest.raises(ModelError):
        correlation_eval(QuantumBathModel(1.0, 0.1), "sideways", 0.0)


def test_invalid_parameters():
    with pytest.raises(ValidationError):
        ClassicalNoiseModel(1.0, 0.0)
    with pytest.raises(ValidationError):
        QuantumBathModel(1.0, 0.1, nbar=-0.1)


@given(st.floats(0.0, 5.0), st.floats(0.01, 2.0))
def test_decoherence_factor_bounds(s, tc):
    d = decoherence_factor(ClassicalNoiseModel(1.0, tc), s)
    assert 0.0 < d <= 1.0


def test_decoherence_factor_limits():
    m = ClassicalNoiseModel(1.0, 1e-4)
    # white-noise limit: exp(-2 gamma s)
    assert decoherence_factor(m, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-3)
    # short times: Gaussian decay exp(-gamma s^2 / tau_c)
    m = ClassicalNoiseModel(1.0, 10.0)
    assert decoherence_factor(m, 0.01) == pytest.approx(math.exp(-1e-4 / 10.0), rel=1e-6)


def test_dephasing_propagator_channel():
    lam = dephasing_propagator(ClassicalNoiseModel(1.0, 0.1))(0.7)
    assert lam.is_trace_preserving()
    assert is_completely_positive(lam)
    rho = np.array([[0.5, 0.5], [0.5, 0.5]])
    out = lam(rho)
    assert out[0, 1] == pytest.approx(0.5 * decoherence_factor(ClassicalNoiseModel(1.0, 0.1), 0.7))


def test_closed_form_amplitude_critical_case():
    assert closed_form_amplitude(1.0, 0.5, 1.0) == pytest.approx(2.0 / math.e, abs=1e-14)


@pytest.mark.parametrize("tc", [0.125, 0.4999999, 0.5, 0.5000001, 2.0])
def test_closed_form_continuous_across_regimes(tc):
    s = np.linspace(0, 4, 9)
    g = closed_form_amplitude(1.0, tc, s)
    assert g[0] == pytest.approx(1.0)
    ref = closed_form_amplitude(1.0, 0.5, s)
    if abs(tc - 0.5) < 1e-6:
        np.testing.assert_allclose(g, ref, atol=1e-6)


@pytest.mark.parametrize("tc", [0.125, 0.5, 2.0])
def test_volterra_matches_closed_form(tc):
    m = QuantumBathModel(1.0, tc)
    s, g = solve_volterra_amplitude(lambda u: m.correlation(u, "down"), 4.0, min(tc, 1.0) / 50)
    np.testing.assert_allclose(g, closed_form_amplitude(1.0, tc, s), atol=1e-7)


def test_volterra_self_check_raises_on_coarse_step():
    m = QuantumBathModel(1.0, 0.05)
    with pytest.raises(AccuracyError):
        solve_volterra_amplitude(lambda u: m.correlation(u, "down"), 4.0, 0.5)


@pytest.mark.parametrize("tc", [0.125, 0.5])
def test_zero_T_propagator_routes_agree(tc):
    m = QuantumBathModel(1.0, tc)
    s = np.linspace(0, 3, 13)
    a = zero_T_decay_propagator(m, 4.0).matrices(s)
    b = zero_T_decay_propagator(m, 4.0, method="closed").matrices(s)
    np.testing.assert_allclose(a, b, atol=1e-7)


def test_zero_T_propagator_rejects_finite_temperature():
    with pytest.raises(ModelError):
        zero_T_decay_propagator(QuantumBathModel(1.0, 0.1, nbar=0.1))


def test_propagator_range_checked():
    lam = zero_T_decay_propagator(QuantumBathModel(1.0, 0.125), 2.0)
    with pytest.raises(ValidationError):
        lam.matrices([3.0])
    with pytest.raises(ValidationError):
        lam.matrices([-0.5])


def test_zero_T_amplitude_damping_structure():
    m = QuantumBathModel(1.0, 0.125)
    lam = zero_T_decay_propagator(m, 2.0)(1.0)
    g = closed_form_amplitude(1.0, 0.125, 1.0)
    rho = np.array([[1.0, 0.0], [0.0, 0.0]])
    out = lam(rho)
    assert out[0, 0].real == pytest.approx(g**2, abs=1e-8)
    assert lam.is_trace_preserving()
    assert is_completely_positive(lam)


@pytest.mark.parametrize("nbar", [0.1, 0.2])
def test_finite_T_routes_close(nbar):
    m = QuantumBathModel(1.0, 0.125, nbar)
    s = np.linspace(0, 1.5, 7)
    exact = finite_T_propagator(m, 2.0).matrices(s)
    ansatz = finite_T_propagator(m, 2.0, method="ansatz").matrices(s)
    # both are trace preserving; the ansatz differs at order gamma * tau_c
    for mats in (exact, ansatz):
        for u in mats:
            assert SuperOperator(u).is_trace_preserving(tol=1e-8)
    assert np.abs(exact - ansatz).max() < 0.05


def test_finite_T_ansatz_relaxes_near_thermal_population():
    nbar = 0.2
    m = QuantumBathModel(1.0, 0.125, nbar)
    lam = finite_T_propagator(m, 12.0, method="ansatz")(12.0)
    out = lam(np.diag([0.0, 1.0]).astype(complex))
    assert out[0, 0].real == pytest.approx(nbar / (2 * nbar + 1), rel=0.1)
    assert is_completely_positive(lam)


def test_finite_T_ansatz_reduces_to_zero_temperature():
    s = np.linspace(0, 2, 9)
    a = finite_T_propagator(QuantumBathModel(1.0, 0.125, 0.0), 3.0, method="ansatz").matrices(s)
    b = zero_T_decay_propagator(QuantumBathModel(1.0, 0.125), 3.0, method="closed").matrices(s)
    np.testing.assert_allclose(a, b, atol=1e-7)


def test_default_propagator_dispatch():
    assert default_propagator(ClassicalNoiseModel(1.0, 0.1)).provenance == "analytic"
    assert default_propagator(QuantumBathModel(1.0, 0.1), 1.0).provenance == "volterra"
    assert default_propagator(QuantumBathModel(1.0, 0.1, 0.1), 1.0).provenance == "pseudomode-tabulated"
    with pytest.raises(ModelError):
        default_propagator(object())


def test_coupling_structures():
    c = QuantumBathModel(1.0, 0.25, 0.5).coupling()
    assert c.rate == pytest.approx(4.0)
    amp = 1.0 / 0.5
    np.testing.assert_allclose(c.pair_amplitude, [[0.0, 1.5 * amp], [0.5 * amp, 0.0]])
    d = ClassicalNoiseModel(1.0, 0.25).coupling()
    assert d.pair_amplitude.shape == (1, 1)
