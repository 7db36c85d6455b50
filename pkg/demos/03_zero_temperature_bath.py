"""
A qubit decaying into a zero-temperature Lorentzian bath
========================================================

The reduced dynamics has a closed form; a single damped pseudomode
reproduces it exactly, which also gives a nonperturbative reference
for the series.
"""

import math

import numpy as np

from cpfseries import (
    QuantumBathModel,
    cpf_from_joint,
    cpf_perturbative,
    default_propagator,
    initial_state,
    pseudomode_joint_prob,
    scheme_preset,
)
from cpfseries.baths import closed_form_amplitude
from cpfseries.pseudomode import PseudomodeModel

# Closed-form amplitude against the embedding, including the critical point.
s, maps = PseudomodeModel(1.0, 0.5).tabulate_reduced(1.0, 0.0025)
print("G(1) at gamma*tau_c = 0.5:", maps[-1, 2, 2].real, " 2/e =", 2 / math.e)
g = closed_form_amplitude(1.0, 0.5, s)
print("max deviation over [0, 1]:", np.abs(maps[:, 2, 2] - g).max())

# When the middle outcome is the ground state, the bath holds no excitation
# and nothing from the past reaches the future.
model = QuantumBathModel(1.0, 0.125)
rho0 = initial_state(0.8)
prop = default_propagator(model, 5.0)
for preset in ("zzz", "xzx"):
    scheme = scheme_preset(preset)
    print(preset)
    print("  gamma*t   y=+1        y=-1 series  y=-1 pseudomode")
    for x in np.linspace(0.5, 3.0, 6):
        up = cpf_perturbative(scheme, model, rho0, x, x, 1, 3, prop).value
        dn = cpf_perturbative(scheme, model, rho0, x, x, -1, 3, prop).value
        pm = cpf_from_joint(pseudomode_joint_prob(model, scheme, rho0, x, x).joint, -1).value
        print(f"  {x:6.2f}  {up: .1e}  {dn: .4e}  {pm: .4e}")
