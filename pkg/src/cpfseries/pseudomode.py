"""Markovian embedding of an exponentially correlated bosonic bath.

A qubit coupled as ``g (sigma_+ a + sigma_- a^+)`` to one damped mode with
decay ``kappa = 2 / tau_c`` and thermal occupation ``nbar`` sees the bath
correlations ``(nbar + 1) (gamma / 2 tau_c) exp(-|t| / tau_c)`` and
``nbar (gamma / 2 tau_c) exp(-|t| / tau_c)`` when ``g**2 = gamma / 2 tau_c``.
Ordering of the tensor product is qubit first, mode second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .operators import PAULI, SuperOperator, commutator_superop, dissipator, partial_trace, vec, unvec

__all__ = ["PseudomodeModel", "CutoffError", "default_cutoff"]


class CutoffError(ArithmeticError):
    """Fock truncation did not converge."""


def default_cutoff(nbar: float) -> int:
    """Fock cutoff whose discarded thermal tail is below ``1e-10``."""
    if nbar == 0:
        return 4
    tail = int(math.ceil(10.0 / math.log10((nbar + 1.0) / nbar)))
    return max(8, tail + 2)


@dataclass(frozen=True)
class PseudomodeModel:
    gamma: float
    tau_c: float
    nbar: float = 0.0
    n_max: int | None = None

    def __post_init__(self):
        if self.n_max is None:
            object.__setattr__(self, "n_max", default_cutoff(self.nbar))

    @property
    def g(self) -> float:
        return math.sqrt(self.gamma / (2.0 * self.tau_c))

    @property
    def kappa(self) -> float:
        return 2.0 / self.tau_c

    @property
    def dims(self) -> tuple[int, int]:
        return (2, self.n_max + 1)

    @cached_property
    def a(self) -> np.ndarray:
        return np.diag(np.sqrt(np.arange(1, self.n_max + 1)), 1).astype(complex)

    def mode_state(self) -> np.ndarray:
        """Thermal state truncated at ``n_max`` and renormalized."""
        n = np.arange(self.n_max + 1)
        if self.nbar == 0:
            p = (n == 0).astype(float)
        else:
            p = (self.nbar / (self.nbar + 1.0)) ** n
        return np.diag(p / p.sum()).astype(complex)

    def mode_generator(self) -> SuperOperator:
        """Free damping of the mode alone."""
        a = self.a
        return (self.kappa * (self.nbar + 1.0)) * dissipator(a) + (self.kappa * self.nbar) * dissipator(a.conj().T)

    @cached_property
    def generator(self) -> SuperOperator:
        eye_m = np.eye(self.n_max + 1)
        a = np.kron(np.eye(2), self.a)
        sp = np.kron(PAULI["+"], eye_m)
        h = self.g * (sp @ a + (sp @ a).conj().T)
        return (commutator_superop(h)
                + (self.kappa * (self.nbar + 1.0)) * dissipator(a)
                + (self.kappa * self.nbar) * dissipator(a.conj().T))

    def step_map(self, h: float) -> np.ndarray:
        return expm(h * self.generator.matrix)

    def evolve(self, rho_se: np.ndarray, t: float, max_step: float | None = None) -> np.ndarray:
        """Evolve a bipartite operator (or a stack of them) for time ``t``."""
        if t <= 0:
            return np.array(rho_se, dtype=complex)
        n, h = self.steps_for(t, max_step)
        u = self.step_map(h)
        v = vec(np.asarray(rho_se, dtype=complex))
        for _ in range(n):
            v = v @ u.T
        return unvec(v, 2 * (self.n_max + 1))

    def steps_for(self, t: float, max_step: float | None = None) -> tuple[int, float]:
        if max_step is None:
            max_step = self.tau_c / 100.0
        n = max(1, int(math.ceil(t / max_step - 1e-9)))
        return n, t / n

    def tabulate_reduced(self, s_max: float, h: float) -> tuple[np.ndarray, np.ndarray]:
        """Reduced qubit propagators on ``0, h, 2h, ..`` up to ``s_max``.

        Returns ``(s, maps)`` with ``maps[k]`` the 4x4 column-stacked matrix
        of ``rho -> Tr_mode(E_s[rho kron sigma_mode])``.
        """
        n = int(math.ceil(s_max / h - 1e-9))
        sm = self.mode_state()
        basis = []
        for j in range(2):
            for i in range(2):
                e = np.zeros((2, 2), dtype=complex)
                e[i, j] = 1.0
                basis.append(vec(np.kron(e, sm)))
        v = np.array(basis)
        u_t = self.step_map(h).T
        maps = np.empty((n + 1, 4, 4), dtype=complex)
        for k in range(n + 1):
            if k:
                v = v @ u_t
            red = partial_trace(unvec(v, 2 * (self.n_max + 1)), self.dims)
            maps[k] = vec(red).T
        return h * np.arange(n + 1), maps
