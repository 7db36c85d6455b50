"""Numerical check of the formal projector solutions for bipartite dynamics.

With ``P X = Tr_e(X) kron sigma_e``, ``Q = 1 - P`` and the full generator
``L(t)``, the irrelevant and relevant parts of ``rho_t`` satisfy

    Q rho_t = G(t, t0) Q rho_0 + int dt' G(t, t') Q L(t') P rho_t'
    P rho_t = P E(t, t0) P rho_0 + int dt' P E(t, t') P L(t') G(t', t0) Q rho_0

where ``E`` and ``G`` are the time-ordered exponentials of ``L`` and ``Q L``.
Both sides are built on one grid from midpoint step exponentials and
trapezoid sums, so their mismatch is a pure discretization error of
order ``h**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (PAULI, SuperOperator, TimeGrid, commutator_superop, projector_P, step_propagators,
                        unvec, vec)

__all__ = ["IdentityReport", "appendix_identity_check", "jaynes_cummings_generator", "correlated_state"]


@dataclass(frozen=True)
class IdentityReport:
    t: float
    n_steps: tuple[int, int]
    irrelevant: tuple[float, float]     # discrepancy at h and h/2
    relevant: tuple[float, float]

    @staticmethod
    def _ratio(pair):
        return pair[0] / pair[1] if pair[1] > 0 else float("inf")

    @property
    def irrelevant_ratio(self) -> float:
        return self._ratio(self.irrelevant)

    @property
    def relevant_ratio(self) -> float:
        return self._ratio(self.relevant)

    def passed(self, lo: float = 3.5, hi: float = 4.5) -> bool:
        return all(lo <= r <= hi for r in (self.irrelevant_ratio, self.relevant_ratio))


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def _trapz_weights(n_steps: int, h: float) -> np.ndarray:
    w = np.full(n_steps + 1, h)
    w[[0, -1]] *= 0.5
    return w


def _discrepancies(gen, sigma_e, rho0_se, t0: float, t: float, n_steps: int, d_s: int) -> tuple[float, float]:
    grid = TimeGrid(t0, t, n_steps)
    p = projector_P(sigma_e, d_s).matrix
    q = np.eye(p.shape[0]) - p

    def lmat(s):
        out = gen(s)
        return out.matrix if isinstance(out, SuperOperator) else np.asarray(out)

    u = step_propagators(gen, grid)
    v = step_propagators(lambda s: q @ lmat(s), grid)
    eye = np.eye(p.shape[0], dtype=complex)

    # forward: states and G(t_k, t0)
    r0 = vec(np.asarray(rho0_se, dtype=complex))
    rho = [r0]
    g_fwd = [eye]
    for k in range(n_steps):
        rho.append(u[k] @ rho[-1])
        g_fwd.append(v[k] @ g_fwd[-1])
    # backward: E(t, t_k) and G(t, t_k)
    e_bwd = [eye] * (n_steps + 1)
    g_bwd = [eye] * (n_steps + 1)
    for k in range(n_steps - 1, -1, -1):
        e_bwd[k] = e_bwd[k + 1] @ u[k]
        g_bwd[k] = g_bwd[k + 1] @ v[k]

    w = _trapz_weights(n_steps, grid.h)
    nodes = grid.nodes
    q_r0 = q @ r0
    irr = g_fwd[-1] @ q_r0
    rel = p @ e_bwd[0] @ p @ r0
    for k in range(n_steps + 1):
        lk = lmat(nodes[k])
        irr = irr + w[k] * (g_bwd[k] @ (q @ (lk @ (p @ rho[k]))))
        rel = rel + w[k] * (p @ (e_bwd[k] @ (p @ (lk @ (g_fwd[k] @ q_r0)))))
    d = int(np.sqrt(r0.size))
    err_irr = _opnorm(unvec(irr - q @ rho[-1], d))
    err_rel = _opnorm(unvec(rel - p @ rho[-1], d))
    return err_irr, err_rel


def appendix_identity_check(gen, sigma_e: np.ndarray, rho0_se: np.ndarray, t: float, n_steps: int,
                            dims: tuple[int, int], t0: float = 0.0) -> IdentityReport:
    """Operator-norm mismatch of both projector identities at ``n_steps`` and ``2 n_steps``."""
    if t == t0:
        return IdentityReport(t, (n_steps, 2 * n_steps), (0.0, 0.0), (0.0, 0.0))
    a = _discrepancies(gen, sigma_e, rho0_se, t0, t, n_steps, dims[0])
    b = _discrepancies(gen, sigma_e, rho0_se, t0, t, 2 * n_steps, dims[0])
    return IdentityReport(t, (n_steps, 2 * n_steps), (a[0], b[0]), (a[1], b[1]))


def jaynes_cummings_generator(n_max: int = 3, g: float = 1.0, detuning: float = 0.7, drive: float = 0.4,
                              omega_d: float = 2.0):
    """Qubit-mode exchange with a periodically modulated detuning.

    Returns ``L(t)`` for ``H(t) = (detuning + drive cos(omega_d t)) sigma_z / 2 + g (sigma_+ a + h.c.)``.
    """
    dm = n_max + 1
    a = np.kron(np.eye(2), np.diag(np.sqrt(np.arange(1, dm)), 1))
    sp = np.kron(PAULI["+"], np.eye(dm))
    sz = np.kron(PAULI["z"], np.eye(dm))
    h_int = commutator_superop(g * (sp @ a + (sp @ a).conj().T)).matrix
    h_z = commutator_superop(0.5 * sz).matrix

    def gen(s: float) -> np.ndarray:
        return h_int + (detuning + drive * np.cos(omega_d * s)) * h_z

    return gen


def correlated_state(n_max: int = 3, weight: float = 0.6) -> np.ndarray:
    """Mixture of ``(|+,0> + |-,1>)/sqrt 2`` with the maximally mixed state."""
    dm = n_max + 1
    psi = np.zeros(2 * dm, dtype=complex)
    psi[0] = psi[dm + 1] = 1.0 / np.sqrt(2.0)
    return weight * np.outer(psi, psi.conj()) + (1.0 - weight) * np.eye(2 * dm) / (2 * dm)
