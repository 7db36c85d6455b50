"""Operational non-Markovianity witnesses for open qubit dynamics.

Joint probabilities of three successive measurements and the conditional
past-future (CPF) correlation, computed from a projector-technique series
around the unperturbed system propagator and from exact references.
"""

from .baths import (ClassicalNoiseModel, QuantumBathModel, correlation_eval, default_propagator,
                    dephasing_propagator, finite_T_propagator, zero_T_decay_propagator)
from .engine import cpf_perturbative, joint_prob_perturbative, markov_term
from .measurement import (CPFResult, JointDistribution, MeasurementScheme, MeasurementSet, cpf_from_joint,
                          initial_state, marginals, projective_set, scheme_preset)
from .oracles import gaussian_dephasing_exact, mc_joint_prob, pseudomode_joint_prob

__version__ = "0.1.0"
