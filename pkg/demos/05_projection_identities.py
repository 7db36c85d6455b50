"""
Two exact identities of the projection formalism, checked numerically
=====================================================================

A qubit coupled to a truncated driven oscillator. The irrelevant and
relevant parts of the evolution obey integral identities; discretizing
them with step h leaves an O(h^2) error, so halving h should divide it by 4.
"""

import numpy as np

from cpfseries.projection import appendix_identity_check, correlated_state, jaynes_cummings_generator

gen = jaynes_cummings_generator(n_max=3)
sigma_e = np.diag([0.7, 0.2, 0.08, 0.02]).astype(complex)
rho0 = correlated_state(3)

for n in (10, 20, 40):
    r = appendix_identity_check(gen, sigma_e, rho0, 2.0, n, (2, 4))
    print(f"n={n:3d}  irrelevant {r.irrelevant[0]:.3e} -> {r.irrelevant[1]:.3e} (x{r.irrelevant_ratio:.3f})"
          f"  relevant {r.relevant[0]:.3e} -> {r.relevant[1]:.3e} (x{r.relevant_ratio:.3f})")
