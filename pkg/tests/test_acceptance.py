"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s`` or
``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from cpfseries import (
    ClassicalNoiseModel,
    QuantumBathModel,
    cpf_from_joint,
    cpf_perturbative,
    default_propagator,
    gaussian_dephasing_exact,
    initial_state,
    joint_prob_perturbative,
    mc_joint_prob,
    pseudomode_joint_prob,
    scheme_preset,
)
from cpfseries import cli
from cpfseries.baths import closed_form_amplitude
from cpfseries.engine import markov_term
from cpfseries.measurement import JointDistribution
from cpfseries.oracles import mode_correlation_check
from cpfseries.projection import appendix_identity_check, correlated_state, jaynes_cummings_generator
from cpfseries.pseudomode import PseudomodeModel


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def test_criterion_01_normalization(report):
    cases = [
        (ClassicalNoiseModel(1.0, 0.05), ("xxx", "xzx")),
        (ClassicalNoiseModel(1.0, 0.1), ("xxx", "zzz")),
        (QuantumBathModel(1.0, 0.125), ("zzz", "xzx", "xxx")),
        (QuantumBathModel(1.0, 0.5), ("zzz", "xzx")),
        (QuantumBathModel(1.0, 0.125, 0.1), ("zzz", "xzx")),
    ]
    worst = 0.0
    for model, presets in cases:
        prop = default_propagator(model, 4.0)
        for preset in presets:
            for p in (0.8, 1.0):
                for t, tau in ((0.7, 0.7), (1.5, 0.4)):
                    for nodes in (11, 41):
                        for order in (1, 2, 3):
                            j, _ = joint_prob_perturbative(scheme_preset(preset), model, initial_state(p), t, tau,
                                                           order, prop, (nodes, nodes))
                            worst = max(worst, abs(j.total() - 1.0))
    report(1, worst <= 1e-12, f"max |sum P - 1| = {worst:.2e} (tol 1e-12)")


def test_criterion_02_zero_temperature_nullity(report):
    worst_pm = worst_series = 0.0
    for tc in (0.125, 0.5):
        model = QuantumBathModel(1.0, tc)
        prop = default_propagator(model, 5.0)
        for preset in ("zzz", "xzx"):
            scheme = scheme_preset(preset)
            for x in np.linspace(0.0, 4.0, 20):
                pm = pseudomode_joint_prob(model, scheme, initial_state(0.8), x, x).joint
                worst_pm = max(worst_pm, abs(cpf_from_joint(pm, 1).value))
                c = cpf_perturbative(scheme, model, initial_state(0.8), x, x, 1, 3, prop)
                worst_series = max(worst_series, abs(c.value))
    ok = worst_pm <= 1e-9 and worst_series <= 1e-9
    report(2, ok, f"max |CPF(y=+1)| pseudomode {worst_pm:.2e}, series {worst_series:.2e} (tol 1e-9)")


def test_criterion_03_first_order_exactness(report):
    model = QuantumBathModel(1.0, 0.125)
    scheme, rho0 = scheme_preset("xzx"), initial_state(0.8)
    prop = default_propagator(model, 5.0)
    err41 = err81 = 0.0
    for x in np.linspace(0.0, 4.0, 21)[1:]:
        ref = cpf_from_joint(pseudomode_joint_prob(model, scheme, rho0, x, x).joint, -1).value
        c41 = cpf_perturbative(scheme, model, rho0, x, x, -1, 1, prop, (41, 41)).orders[0]
        c81 = cpf_perturbative(scheme, model, rho0, x, x, -1, 1, prop, (81, 81)).orders[0]
        err41, err81 = max(err41, abs(c41 - ref)), max(err81, abs(c81 - ref))
    ratio = err41 / err81
    ok = err41 <= 5e-3 and ratio >= 3.0
    report(3, ok, f"max |order1 - pseudomode| = {err41:.2e} (tol 5e-3), step-halving ratio {ratio:.2f} (>= 3)")


def _dephasing_error(tc):
    model = ClassicalNoiseModel(1.0, tc)
    scheme, rho0 = scheme_preset("xxx"), initial_state(1.0)
    worst, first = 0.0, 0.0
    for x in np.linspace(0.0, 3.0, 31)[1:]:
        c = cpf_perturbative(scheme, model, rho0, x, x, 1, 3)
        ref = cpf_from_joint(gaussian_dephasing_exact(model, scheme, rho0, x, x).joint, 1).value
        worst = max(worst, abs(c.value - ref))
        first = max(first, abs(c.orders[0]))
    return worst, first


def test_criterion_04_dephasing_convergence(report):
    e05, f05 = _dephasing_error(0.05)
    e10, f10 = _dephasing_error(0.1)
    first = max(f05, f10)
    ok = e05 <= 0.5 * e10 and first <= 1e-12
    report(4, ok, f"max err N=3: {e05:.2e} (gamma tau_c=0.05) vs {e10:.2e} (0.1), ratio {e05 / e10:.3f} (<= 0.5); "
                  f"max |order1| = {first:.1e}")


def test_criterion_05_oracle_cross_validation(report):
    scheme, rho0 = scheme_preset("xxx"), initial_state(1.0)
    worst = 0.0
    for tc in (0.05, 0.1):
        model = ClassicalNoiseModel(1.0, tc)
        mc = mc_joint_prob(model, scheme, rho0, 1.0, 1.0, n_traj=1_000_000, seed=20240601)
        ex = gaussian_dephasing_exact(model, scheme, rho0, 1.0, 1.0).joint.table
        # the analytic reference carries no sampling error
        z = np.abs(mc.joint.table - ex) / mc.stderr
        worst = max(worst, float(z.max()))
    report(5, worst <= 3.0, f"max |MC - exact| / stderr = {worst:.2f} (<= 3) at 1e6 trajectories")


def test_criterion_06_embedding_fidelity(report):
    worst = 0.0
    for tc in (0.125, 0.5, 2.0):
        s, maps = PseudomodeModel(1.0, tc).tabulate_reduced(4.0, tc / 200)
        g = closed_form_amplitude(1.0, tc, s)
        worst = max(worst, float(np.abs(maps[:, 2, 2] - g).max()), float(np.abs(maps[:, 0, 0] - g**2).max()))
    s, maps = PseudomodeModel(1.0, 0.5).tabulate_reduced(1.0, 0.5 / 200)
    crit = abs(maps[-1, 2, 2].real - 2.0 / math.e)
    corr = max(mode_correlation_check(PseudomodeModel(1.0, 0.125, nbar, n_max), np.linspace(0, 2, 21))["max_dev"]
               for nbar, n_max in ((0.0, 4), (0.1, 14), (0.2, 16)))
    ok = worst <= 1e-6 and crit <= 1e-6 and corr <= 1e-8
    report(6, ok, f"max |G_pm - G| = {worst:.2e}, |G(1) - 2/e| = {crit:.2e} (tol 1e-6); "
                  f"correlation dev {corr:.2e} (tol 1e-8)")


def test_criterion_07_projection_identities(report):
    sigma_e = np.diag([0.7, 0.2, 0.08, 0.02]).astype(complex)
    r = appendix_identity_check(jaynes_cummings_generator(n_max=3), sigma_e, correlated_state(3), 2.0, 40, (2, 4))
    report(7, r.passed(), f"error ratios under h -> h/2: irrelevant {r.irrelevant_ratio:.3f}, "
                          f"relevant {r.relevant_ratio:.3f} (in [3.5, 4.5])")


def _amplitude(model, scheme, y, prop, xs):
    return max(abs(cpf_perturbative(scheme, model, initial_state(0.8), x, x, y, 2, prop).value) for x in xs)


def test_criterion_08_temperature_scaling(report):
    nbars = (0.05, 0.1, 0.2)
    scheme = scheme_preset("xzx")
    first, amp_plus, amp_minus, zzz_minus = [], [], [], []
    for nb in nbars:
        model = QuantumBathModel(1.0, 0.125, nb)
        prop = default_propagator(model, 5.0)
        first.append(cpf_perturbative(scheme, model, initial_state(0.8), 0.25, 0.25, 1, 1, prop).orders[0])
        xs = np.linspace(0.0, 4.0, 21)[1:] / (1.0 + nb)
        amp_plus.append(_amplitude(model, scheme, 1, prop, xs))
        amp_minus.append(_amplitude(model, scheme, -1, prop, xs))
        zzz_minus.append(_amplitude(model, scheme_preset("zzz"), -1, prop, xs))
    ratios = [first[1] / first[0] / 2.0 - 1.0, first[2] / first[1] / 2.0 - 1.0]
    lin = max(abs(r) for r in ratios)
    inc = all(b > a for a, b in zip(amp_plus, amp_plus[1:]))
    weak = (max(amp_minus) - min(amp_minus)) / max(amp_minus)
    zzz_weak = (max(zzz_minus) - min(zzz_minus)) / max(zzz_minus)
    ok = lin <= 0.05 and inc and weak < 0.2
    report(8, ok, f"x-z-x: order-1 ratio error {lin:.3f} (<= 0.05); y=+1 amplitudes "
                  f"{', '.join('%.2e' % a for a in amp_plus)} increasing={inc}; y=-1 spread {weak:.3f} (< 0.2) "
                  f"[z-z-z y=-1 spread {zzz_weak:.3f}, no first-order term]")


def test_criterion_09_internal_consistency(report):
    worst = 0.0
    cases = [(ClassicalNoiseModel(1.0, 0.1), "xxx", 1.0), (QuantumBathModel(1.0, 0.125), "xzx", 0.8),
             (QuantumBathModel(1.0, 0.5), "zzz", 0.8), (QuantumBathModel(1.0, 0.125, 0.1), "xzx", 0.8)]
    for model, preset, p in cases:
        scheme, rho0 = scheme_preset(preset), initial_state(p)
        for order in (1, 2, 3):
            j, _ = joint_prob_perturbative(scheme, model, rho0, 1.1, 0.9, order, nodes=(41, 41))
            for y in (1, -1):
                a = cpf_perturbative(scheme, model, rho0, 1.1, 0.9, y, order, nodes=(41, 41)).value
                worst = max(worst, abs(a - cpf_from_joint(j, y).value))
    markov = 0.0
    rng = np.random.default_rng(1)
    for _ in range(200):
        px = rng.dirichlet([1, 1])
        py_x = rng.dirichlet([1, 1], size=2).T
        pz_y = rng.dirichlet([1, 1], size=2).T
        j = JointDistribution(np.einsum("zy,yx,x->zyx", pz_y, py_x, px))
        markov = max(markov, *(abs(cpf_from_joint(j, y).value) for y in (1, -1)))
    for model, preset, p in cases:
        m = markov_term(scheme_preset(preset), default_propagator(model, 3.0), initial_state(p), 0.8, 1.3)
        markov = max(markov, *(abs(cpf_from_joint(m, y).value) for y in (1, -1)))
    ok = worst <= 1e-10 and markov <= 1e-14
    report(9, ok, f"max |cpf_perturbative - cpf_from_joint| = {worst:.2e} (tol 1e-10); "
                  f"max Markov CPF = {markov:.1e} (tol 1e-14)")


def test_criterion_10_determinism(report, tmp_path):
    out = tmp_path / "run.csv"
    args = ["simulate", "--set", "grid.t_max=1.5", "--set", "grid.n_points=4", "--set", "series.max_order=3",
            "--set", "oracle.kind=mc", "--set", "oracle.n_traj=5000", "--set", "oracle.seed=7",
            "--set", f"output={out}"]
    blobs = []
    for workers in ("1", "1", "3"):
        assert cli.main([*args, "--workers", workers]) == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    report(10, ok, f"serial, serial and 3-worker CSVs byte-identical: {ok} ({len(blobs[0])} bytes)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
