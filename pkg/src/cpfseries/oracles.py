"""Independent references: Monte Carlo dephasing, Gaussian-phase averages and
pseudomode simulation of the bosonic bath."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .baths import ClassicalNoiseModel, ModelError, QuantumBathModel
from .measurement import JointDistribution, MeasurementScheme, build_post_first_states, cpf_from_joint
from .operators import partial_trace, unvec, vec
from .pseudomode import CutoffError, PseudomodeModel

__all__ = [
    "OracleResult",
    "OUPathSampler",
    "mc_joint_prob",
    "phase_covariance",
    "gaussian_dephasing_exact",
    "pseudomode_joint_prob",
    "mode_correlation_check",
    "cpf_stderr",
]


@dataclass(frozen=True)
class OracleResult:
    joint: JointDistribution
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _phase_coefficients(effect: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``Tr(E U rho U^+)`` with ``U rho U^+`` rotating coherences by ``exp(-i phi)``.

    Returned as coefficients of ``exp(i a phi)`` for ``a = -1, 0, 1``.
    """
    c0 = effect[0, 0] * rho[0, 0] + effect[1, 1] * rho[1, 1]
    cm = effect[1, 0] * rho[0, 1]     # rho_{+-} picks up exp(-i phi)
    cp = effect[0, 1] * rho[1, 0]
    return np.array([cm, c0, cp])


class OUPathSampler:
    """Exact Ornstein-Uhlenbeck updates for ``chi(t) = (gamma / 2 tau_c) exp(-|t| / tau_c)``.

    Trajectory ``i`` belongs to chunk ``i // chunk`` whose normal variates come
    from a Philox stream keyed by ``(seed, chunk index)``, so results do not
    depend on how chunks are scheduled.
    """

    def __init__(self, gamma: float, tau_c: float, h: float, seed: int, chunk: int = 20000):
        self.gamma, self.tau_c, self.h = gamma, tau_c, h
        self.seed = int(seed) & (2**64 - 1)
        self.chunk = chunk
        self.var = gamma / (2.0 * tau_c)
        self.decay = math.exp(-h / tau_c)
        self.kick = math.sqrt(self.var * -math.expm1(-2.0 * h / tau_c))

    def rng(self, chunk_index: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.seed, chunk_index]))

    def phases(self, n: int, steps: tuple[int, ...], chunk_index: int) -> list[np.ndarray]:
        """Trapezoid phases ``2 int xi`` over consecutive windows of ``steps`` steps."""
        rng = self.rng(chunk_index)
        xi = math.sqrt(self.var) * rng.standard_normal(n)
        out = []
        for m in steps:
            acc = np.zeros(n)
            for _ in range(m):
                nxt = self.decay * xi + self.kick * rng.standard_normal(n)
                acc += xi + nxt
                xi = nxt
            out.append(self.h * acc)   # 2 * (h/2) * sum(xi_k + xi_{k+1})
        return out


def _window_steps(t: float, tau: float, h_max: float) -> tuple[float, int, int]:
    """Common step ``h <= h_max`` that puts both ``t`` and ``t + tau`` on the grid."""
    span = t + tau
    if span <= 0:
        return h_max, 0, 0
    n = max(1, int(math.ceil(span / h_max - 1e-9)))
    # refine until t falls on a node
    for m in range(n, 100 * n + 1):
        h = span / m
        k = t / h
        if abs(k - round(k)) < 1e-9:
            return h, int(round(k)), m - int(round(k))
    raise ValueError("could not align t and tau on a common grid")


def _require_qubit_dephasing(model, scheme):
    if not isinstance(model, ClassicalNoiseModel):
        raise ModelError("dephasing oracle needs a classical noise model")
    if scheme.first.dim != 2:
        raise ModelError("dephasing oracle supports qubit schemes only")


def _coefficient_tables(scheme: MeasurementScheme, rho0):
    states = build_post_first_states(rho0, scheme.first)
    e_y, e_z = scheme.middle.effects, scheme.last.effects
    past = np.array([[_phase_coefficients(ey, rx) for rx in states.rho_x] for ey in e_y])   # [y, x, a]
    fut = np.array([[_phase_coefficients(ez, ey) for ey in e_y] for ez in e_z])              # [z, y, b]
    return past, fut


def mc_joint_prob(model: ClassicalNoiseModel, scheme: MeasurementScheme, rho0, t: float, tau: float,
                  n_traj: int = 100_000, seed: int = 0, h: float | None = None, chunk: int = 20000,
                  chunks: range | None = None) -> OracleResult:
    """Monte Carlo average over Ornstein-Uhlenbeck noise paths.

    Each path evolves ``rho_x`` to ``t``, the middle outcome resets the state
    to ``rho_y``, and the same continuing path evolves it to ``t + tau``.
    """
    _require_qubit_dephasing(model, scheme)
    if n_traj < 1000:
        raise ValueError("n_traj must be at least 1000")
    h_max = h if h is not None else model.tau_c / 50.0
    past, fut = _coefficient_tables(scheme, rho0)
    shape = (fut.shape[0], past.shape[0], past.shape[1])
    if model.gamma == 0 or t + tau == 0:
        table = np.real(np.einsum("zyb,yxa->zyx", fut, past))
        return OracleResult(JointDistribution.for_scheme(table, scheme), np.zeros(shape), {"n_traj": n_traj})
    hh, k1, k2 = _window_steps(t, tau, h_max)
    sampler = OUPathSampler(model.gamma, model.tau_c, hh, seed, chunk)
    n_chunks = -(-n_traj // chunk)
    s1 = np.zeros(shape)
    s2 = np.zeros((s1.size, s1.size))
    a = np.array([-1, 0, 1])
    for c in (chunks if chunks is not None else range(n_chunks)):
        n = min(chunk, n_traj - c * chunk)
        phi1, phi2 = sampler.phases(n, (k1, k2), c)
        e1 = np.exp(1j * a[:, None] * phi1[None])          # [a, path]
        e2 = np.exp(1j * a[:, None] * phi2[None])
        p1 = np.einsum("yxa,ap->yxp", past, e1).real
        p2 = np.einsum("zyb,bp->zyp", fut, e2).real
        sample = np.einsum("zyp,yxp->zyxp", p2, p1)
        flat = sample.reshape(s1.size, n)
        s1 += sample.sum(axis=-1)
        s2 += flat @ flat.T
    mean = s1 / n_traj
    m = mean.reshape(-1)
    cov = (s2 / n_traj - np.outer(m, m)) / (n_traj - 1)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0)).reshape(shape)
    meta = {"n_traj": n_traj, "seed": seed, "step": hh, "chunk": chunk, "covariance": cov}
    return OracleResult(JointDistribution.for_scheme(mean, scheme, se), se, meta)


def phase_covariance(model: ClassicalNoiseModel, t: float, tau: float) -> np.ndarray:
    """Covariance of ``phi_1 = 2 int_0^t xi`` and ``phi_2 = 2 int_t^{t+tau} xi``."""
    g, tc = model.gamma, model.tau_c

    def var(s):
        return 4.0 * g * (s + tc * math.expm1(-s / tc))

    cov = 2.0 * g * tc * (-math.expm1(-t / tc)) * (-math.expm1(-tau / tc))
    return np.array([[var(t), cov], [cov, var(tau)]])


def gaussian_dephasing_exact(model: ClassicalNoiseModel, scheme: MeasurementScheme, rho0, t: float, tau: float,
                             covariance: np.ndarray | None = None) -> OracleResult:
    """Closed-form joint table from Gaussian phase averages.

    Each trace is ``sum_a c_a exp(i a phi)``; products average to
    ``exp(-(a, b) C (a, b)^T / 2)`` with ``C`` the phase covariance.
    """
    _require_qubit_dephasing(model, scheme)
    c = phase_covariance(model, t, tau) if covariance is None else np.asarray(covariance, dtype=float)
    past, fut = _coefficient_tables(scheme, rho0)
    a = np.array([-1.0, 0.0, 1.0])
    quad = a[:, None] ** 2 * c[0, 0] + a[None, :] ** 2 * c[1, 1] + 2.0 * a[:, None] * a[None, :] * c[0, 1]
    char = np.exp(-0.5 * quad)                         # [a, b]
    table = np.einsum("zyb,yxa,ab->zyx", fut, past, char)
    table = np.real_if_close(table, tol=1e6).real
    return OracleResult(JointDistribution.for_scheme(table, scheme), None, {"covariance": c.tolist()})


# ---------------------------------------------------------------------------
# pseudomode


def _pm_table(pm: PseudomodeModel, scheme: MeasurementScheme, rho0, t: float, tau: float, max_step):
    states = build_post_first_states(rho0, scheme.first)
    sm = pm.mode_state()
    e_y, e_z = scheme.middle.effects, scheme.last.effects
    start = np.array([np.kron(rx, sm) for rx in states.rho_x])
    at_t = pm.evolve(start, t, max_step)                                  # [x]
    dm = pm.n_max + 1
    blocks = at_t.reshape(len(start), 2, dm, 2, dm)
    table = np.zeros(scheme.shape)
    for iy, ey in enumerate(e_y):
        env = np.einsum("ab,xbman->xmn", ey, blocks)                       # Tr_s(E_y .)
        reset = np.array([np.kron(ey, m) for m in env])
        final = pm.evolve(reset, tau, max_step)
        red = partial_trace(final, pm.dims)
        table[:, iy, :] = np.einsum("zab,xba->zx", e_z, red).real
    return table


def pseudomode_joint_prob(model: QuantumBathModel, scheme: MeasurementScheme, rho0, t: float, tau: float,
                          n_max: int | None = None, max_step: float | None = None, check: bool = True,
                          tol: float = 1e-8) -> OracleResult:
    """Joint table from the bath replaced by its damped-mode embedding.

    After the middle outcome the qubit is reset to ``rho_y`` while the mode
    keeps the (unnormalized) state conditioned on that outcome.
    """
    if not isinstance(model, QuantumBathModel):
        raise ModelError("pseudomode oracle needs a bosonic bath model")
    pm = model.pseudomode(n_max)
    table = _pm_table(pm, scheme, rho0, t, tau, max_step)
    meta = {"n_max": pm.n_max}
    if check and model.nbar > 0:
        alt = _pm_table(model.pseudomode(pm.n_max + 2), scheme, rho0, t, tau, max_step)
        change = float(np.max(np.abs(alt - table)))
        meta["cutoff_change"] = change
        if change > tol:
            raise CutoffError(f"Fock cutoff {pm.n_max} not converged (change {change:.2e})")
    return OracleResult(JointDistribution.for_scheme(table, scheme), None, meta)


def mode_correlation_check(pm: PseudomodeModel, times) -> dict:
    """Quantum-regression correlations of the free mode against closed forms."""
    times = np.asarray(times, dtype=float)
    a = pm.a
    ad = a.conj().T
    sm = pm.mode_state()
    gen = pm.mode_generator().matrix
    down, up = [], []
    for s in times:
        u = expm(s * gen)
        down.append(np.trace(a @ unvec(u @ vec(ad @ sm))))
        up.append(np.trace(ad @ unvec(u @ vec(a @ sm))))
    down = pm.g**2 * np.array(down).real
    up = pm.g**2 * np.array(up).real
    ref = pm.g**2 * np.exp(-times / pm.tau_c)
    dev_down = float(np.max(np.abs(down - (pm.nbar + 1.0) * ref)))
    dev_up = float(np.max(np.abs(up - pm.nbar * ref)))
    ratio_dev = float(np.max(np.abs(up / down - pm.nbar / (pm.nbar + 1.0))))
    return {"max_dev_down": dev_down, "max_dev_up": dev_up, "max_ratio_dev": ratio_dev,
            "max_dev": max(dev_down, dev_up)}


def cpf_stderr(result: OracleResult, y: float, step: float = 1e-7) -> float:
    """Delta-method standard error of the CPF from a Monte Carlo table."""
    cov = result.meta.get("covariance")
    if cov is None:
        return 0.0
    base = result.joint.table
    grad = np.zeros(base.size)
    for i in range(base.size):
        tabs = []
        for sgn in (1.0, -1.0):
            t = base.reshape(-1).copy()
            t[i] += sgn * step
            j = JointDistribution(t.reshape(base.shape), result.joint.z_values, result.joint.y_values,
                                  result.joint.x_values)
            tabs.append(cpf_from_joint(j, y).value)
        grad[i] = (tabs[0] - tabs[1]) / (2.0 * step)
    return float(np.sqrt(max(grad @ cov @ grad, 0.0)))
