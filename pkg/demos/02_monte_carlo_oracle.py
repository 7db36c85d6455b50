"""
Checking the dephasing result against sampled noise paths
=========================================================

The Gaussian reference is exact; Monte Carlo over Ornstein-Uhlenbeck
trajectories gives an independent estimate with error bars.
"""

from cpfseries import (
    ClassicalNoiseModel,
    cpf_from_joint,
    gaussian_dephasing_exact,
    initial_state,
    mc_joint_prob,
    scheme_preset,
)
from cpfseries.oracles import cpf_stderr

scheme, rho0 = scheme_preset("xxx"), initial_state(1.0)
model = ClassicalNoiseModel(1.0, 0.1)

mc = mc_joint_prob(model, scheme, rho0, 1.0, 1.0, n_traj=200_000, seed=1)
ex = gaussian_dephasing_exact(model, scheme, rho0, 1.0, 1.0).joint

print("z-scores of the joint table entries:")
print(((mc.joint.table - ex.table) / mc.stderr).round(2))

# The CPF is a small difference of products, so it needs far more paths than
# the table entries do before its error bar drops below its size.
c_mc = cpf_from_joint(mc.joint, 1).value
c_ex = cpf_from_joint(ex, 1).value
print(f"CPF  MC {c_mc:.4e} +- {cpf_stderr(mc, 1):.1e}   exact {c_ex:.4e}")

# Same seed, same numbers. Chunks draw from their own Philox streams so
# splitting work across processes does not change the result.
again = mc_joint_prob(model, scheme, rho0, 1.0, 1.0, n_traj=200_000, seed=1)
print("bitwise reproducible:", again.joint.table.tobytes() == mc.joint.table.tobytes())
