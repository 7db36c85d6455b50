import numpy as np
import pytest

from cpfseries.baths import closed_form_amplitude
from cpfseries.oracles import mode_correlation_check
from cpfseries.operators import SuperOperator, partial_trace
from cpfseries.pseudomode import PseudomodeModel, default_cutoff


def test_default_cutoffs():
    assert default_cutoff(0.0) == 4
    assert default_cutoff(0.05) >= 8
    assert default_cutoff(0.2) > default_cutoff(0.1)


def test_coupling_and_damping():
    pm = PseudomodeModel(1.0, 0.125)
    assert pm.g == pytest.approx(2.0)
    assert pm.kappa == pytest.approx(16.0)
    assert pm.dims == (2, 5)


def test_mode_state_renormalized():
    pm = PseudomodeModel(1.0, 0.125, nbar=0.5, n_max=3)
    sm = pm.mode_state()
    assert np.trace(sm).real == pytest.approx(1.0, abs=1e-15)
    p = np.real(np.diag(sm))
    np.testing.assert_allclose(p[1:] / p[:-1], 1.0 / 3.0)


def test_step_map_trace_preserving():
    pm = PseudomodeModel(1.0, 0.125, nbar=0.1, n_max=5)
    assert SuperOperator(pm.step_map(0.05)).is_trace_preserving(tol=1e-12)


@pytest.mark.parametrize("tc", [0.125, 0.5, 2.0])
def test_zero_T_reduced_dynamics_matches_amplitude(tc):
    pm = PseudomodeModel(1.0, tc)
    s, maps = pm.tabulate_reduced(2.0, tc / 100)
    g = closed_form_amplitude(1.0, tc, s)
    np.testing.assert_allclose(maps[:, 0, 0].real, g**2, atol=1e-6)
    np.testing.assert_allclose(maps[:, 2, 2].real, g, atol=1e-6)


def test_evolve_stack_matches_single():
    pm = PseudomodeModel(1.0, 0.25, nbar=0.1, n_max=6)
    sm = pm.mode_state()
    states = np.array([np.kron(np.diag([1.0, 0.0]), sm), np.kron(np.diag([0.0, 1.0]), sm)])
    both = pm.evolve(states, 0.4)
    one = pm.evolve(states[1], 0.4)
    np.testing.assert_allclose(both[1], one, atol=1e-14)
    assert np.trace(partial_trace(both[0], pm.dims)).real == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("nbar,n_max", [(0.0, 4), (0.1, 14), (0.2, 16)])
def test_mode_correlations(nbar, n_max):
    rep = mode_correlation_check(PseudomodeModel(1.0, 0.125, nbar, n_max), np.linspace(0.0, 1.0, 11))
    assert rep["max_dev"] <= 1e-8
    if nbar > 0:
        assert rep["max_ratio_dev"] <= 1e-8
