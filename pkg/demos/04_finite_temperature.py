"""
Thermal baths switch on the excited-outcome channel
===================================================

With a thermal occupation nbar the bath can also feed energy into the
qubit, so the y=+1 branch picks up memory that grows with nbar. The time
axis is gamma*(nbar+1)*t so different temperatures line up.
"""

import numpy as np

from cpfseries import QuantumBathModel, cpf_perturbative, default_propagator, initial_state, scheme_preset

scheme, rho0 = scheme_preset("xzx"), initial_state(0.8)
print(" nbar   max|CPF(y=+1)|  max|CPF(y=-1)|")
for nbar in (0.0, 0.05, 0.1, 0.2):
    model = QuantumBathModel(1.0, 0.125, nbar)
    prop = default_propagator(model, 5.0)
    xs = np.linspace(0.2, 4.0, 20) / (1.0 + nbar)
    up = max(abs(cpf_perturbative(scheme, model, rho0, x, x, 1, 2, prop).value) for x in xs)
    dn = max(abs(cpf_perturbative(scheme, model, rho0, x, x, -1, 2, prop).value) for x in xs)
    print(f" {nbar:4.2f}   {up:.3e}       {dn:.3e}")

# The unperturbed propagator comes from a tabulated pseudomode run by default.
# The rate ansatz is a cheaper approximation that agrees at short times.
model = QuantumBathModel(1.0, 0.125, 0.1)
a = default_propagator(model, 2.0)
b = default_propagator(model, 2.0, method="ansatz")
print("pseudomode vs ansatz at s=1:", np.abs(a(1.0).matrix - b(1.0).matrix).max())
