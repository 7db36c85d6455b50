"""
Memory in a qubit under coloured dephasing noise
=================================================

Three x-basis measurements at times 0, t and t + tau. The qubit is kicked by
Ornstein-Uhlenbeck noise with correlation time tau_c. Without memory the
conditional past-future correlation vanishes; here it does not.
"""

import numpy as np

from cpfseries import (
    ClassicalNoiseModel,
    cpf_from_joint,
    cpf_perturbative,
    gaussian_dephasing_exact,
    initial_state,
    scheme_preset,
)

scheme = scheme_preset("xxx")
rho0 = initial_state(1.0)

# Compare partial sums of the series with the exact Gaussian result.
for tc in (0.05, 0.1):
    model = ClassicalNoiseModel(gamma=1.0, tau_c=tc)
    print(f"gamma*tau_c = {tc}")
    print("  gamma*t   order1     +order2     +order3     exact")
    for x in np.linspace(0.5, 3.0, 6):
        c = cpf_perturbative(scheme, model, rho0, x, x, y=1, max_order=3)
        partial = np.cumsum(c.orders)
        ex = cpf_from_joint(gaussian_dephasing_exact(model, scheme, rho0, x, x).joint, 1).value
        print(f"  {x:6.2f}  {partial[0]: .3e}  {partial[1]: .3e}  {partial[2]: .3e}  {ex: .3e}")

# First order is identically zero for pure dephasing, and the two
# middle outcomes give the same value.
model = ClassicalNoiseModel(1.0, 0.1)
a = cpf_perturbative(scheme, model, rho0, 1.0, 1.0, y=1, max_order=3)
b = cpf_perturbative(scheme, model, rho0, 1.0, 1.0, y=-1, max_order=3)
print("orders (y=+1):", a.orders)
print("y-independence:", abs(a.value - b.value))
