"""Projector-technique series for joint probabilities and the CPF correlation.

Each order-``n`` term carries ``2n`` interaction insertions. The first sits
in ``[0, t]`` before the middle measurement, the last in ``[t, t + tau]``
after it, and the others anywhere in between in time order. Every
insertion expands into a left branch ``-i S X`` and a right branch
``+i X S``; every gap between consecutive insertions carries ``Q = 1 - P``.
For a Gaussian bath the bath trace reduces to sums over pairings, and the
``1 - P`` expansion keeps exactly the pairings whose arcs cover every gap.

Two evaluation routes are provided:

* :func:`xi_order_n` expands everything literally (branches, ``1 - P``
  choices, Wick pairings per segment) at given insertion times. It is slow
  and serves as a reference.
* :func:`series_integrals` runs a forward recursion over the time grid
  whose state is the system matrix together with the multiset of open
  pair labels. Pair weights ``A exp(-|dt| / tau_c)`` factor into a per-step
  decay of every open pair, and the nested time integrals become cumulative
  trapezoid sums.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .baths import ClassicalNoiseModel, CouplingStructure, ModelError, QuantumBathModel, default_propagator
from .measurement import (
    CPFResult,
    ConditioningError,
    JointDistribution,
    MeasurementScheme,
    build_post_first_states,
    real_part_checked,
)
from .operators import TOL, ValidationError, unvec, vec

log = logging.getLogger(__name__)

__all__ = [
    "MAX_ORDER",
    "UnsupportedOrderError",
    "SeriesResult",
    "markov_term",
    "xi_order1",
    "xi_order_n",
    "wick_pairings",
    "segment_moment",
    "series_integrals",
    "joint_prob_perturbative",
    "cpf_perturbative",
    "default_nodes",
]

MAX_ORDER = 3
LEFT, RIGHT = 0, 1


class UnsupportedOrderError(ValueError):
    pass


@dataclass(frozen=True)
class SeriesResult:
    """Double-integrated order contributions ``orders[n-1][z, y, x]``."""

    orders: np.ndarray
    nodes: tuple[int, int]
    max_order: int
    markov: np.ndarray = field(default=None)

    def partial_sums(self) -> np.ndarray:
        return self.markov[None] + np.cumsum(self.orders, axis=0)


def _check_order(n: int, model) -> None:
    if n < 1 or n > MAX_ORDER:
        raise UnsupportedOrderError(f"order {n} outside 1..{MAX_ORDER}")
    if not getattr(model, "gaussian", False):
        raise ModelError("series evaluation needs a Gaussian bath")


def _apply(maps: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """Apply a 4x4 (or stacked) column-stacked map to stacked operators."""
    return unvec(np.einsum("...ab,...b->...a", maps, vec(ops)))


def _traces(effects: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """``out[i, ...] = Tr(effects[i] ops[...])``."""
    return np.einsum("iab,...ba->i...", effects, ops)


def markov_term(scheme: MeasurementScheme, propagator, rho0: np.ndarray, t: float, tau: float) -> JointDistribution:
    """Factorized part ``Tr(E_z Lambda_tau[rho_y]) Tr(E_y Lambda_t[rho_x])``."""
    states = build_post_first_states(rho0, scheme.first)
    lam_t, lam_tau = propagator.matrices([t])[0], propagator.matrices([tau])[0]
    e_y, e_z = scheme.middle.effects, scheme.last.effects
    past = _traces(e_y, _apply(lam_t, states.rho_x))          # [y, x]
    fut = _traces(e_z, _apply(lam_tau, e_y))                  # [z, y]
    table = real_part_checked(fut[:, :, None] * past[None], what="Markov table")
    return JointDistribution.for_scheme(table, scheme)


# ---------------------------------------------------------------------------
# literal expansion


def wick_pairings(n: int):
    """All perfect matchings of ``range(n)`` as tuples of ordered pairs."""
    if n % 2:
        return []

    def rec(items):
        if not items:
            yield ()
            return
        a, rest = items[0], items[1:]
        for i, b in enumerate(rest):
            for tail in rec(rest[:i] + rest[i + 1:]):
                yield ((a, b),) + tail

    return list(rec(tuple(range(n))))


def segment_moment(ops: list[tuple[int, float]], coupling: CouplingStructure) -> complex:
    """Gaussian moment ``<X_1 ... X_k>`` of symbols ``(mu, time)`` in trace order."""
    if not ops:
        return 1.0
    total = 0.0
    amp, rate = coupling.pair_amplitude, coupling.rate
    for pairing in wick_pairings(len(ops)):
        w = 1.0
        for a, b in pairing:
            (ma, ta), (mb, tb) = ops[a], ops[b]
            w *= amp[ma, mb] * math.exp(-rate * abs(ta - tb))
            if w == 0.0:
                break
        total += w
    return total


def _linearize(segment):
    """Trace order: right-branch symbols in time order, then left-branch reversed."""
    rights = [(mu, s) for (b, mu, s) in segment if b == RIGHT]
    lefts = [(mu, s) for (b, mu, s) in segment if b == LEFT]
    return rights + lefts[::-1]


def _literal_chain(times: list[float], n_past: int, coupling, lam, slot, e_y, rho_y, e_z, t, tau) -> np.ndarray:
    """Fully expanded chain at fixed ordered insertion ``times``; returns ``[z]``."""
    ops = coupling.operators
    n_ins = len(times)
    start = _apply(lam.matrices([times[0]])[0], slot)
    lam_end = lam.matrices([t + tau - times[-1]])[0]
    out = np.zeros(len(e_z), dtype=complex)
    labels = [(b, mu) for mu in range(len(ops)) for b in (LEFT, RIGHT)]
    for assign in itertools.product(labels, repeat=n_ins):
        m = start
        for i, (b, mu) in enumerate(assign):
            if i == n_past:
                m = rho_y * np.trace(e_y @ m)
            m = -1j * ops[mu] @ m if b == LEFT else 1j * m @ ops[mu]
        sys_val = _traces(e_z, _apply(lam_end, m))
        # each gap holds Q = 1 - P; a P closes the bath segment so far
        env = 0.0
        for cuts in itertools.product((False, True), repeat=n_ins - 1):
            sign, w, seg = 1.0, 1.0, []
            for i, (b, mu) in enumerate(assign):
                seg.append((b, mu, times[i]))
                if i < n_ins - 1 and cuts[i]:
                    sign = -sign
                    w *= segment_moment(_linearize(seg), coupling)
                    seg = []
                    if w == 0.0:
                        break
            if w != 0.0:
                w *= segment_moment(_linearize(seg), coupling)
            env += sign * w
        out += env * sys_val
    return out


def _simplex_weights(lo: float, hi: float, k: int, nodes: int):
    """Nested trapezoid points/weights for ``lo < s_1 < ... < s_k < hi``.

    The outermost variable is ``s_k``; each inner variable uses a trapezoid
    rule with ``nodes`` points on ``[lo, s_next]``.
    """
    if k == 0:
        yield (), 1.0
        return
    if hi <= lo:
        return
    xs = np.linspace(lo, hi, nodes)
    h = xs[1] - xs[0]
    for i, s in enumerate(xs):
        w = h * (0.5 if i in (0, nodes - 1) else 1.0)
        for inner, wi in _simplex_weights(lo, s, k - 1, nodes):
            yield inner + (s,), w * wi


def xi_order_n(n: int, model, propagator, slot, e_y, rho_y, e_z, t, tau, t_prime, tau_prime,
               inner_nodes: int = 9) -> np.ndarray:
    """Order-``n`` integrand at ``(t', tau')`` by literal expansion; returns ``[z]``.

    Mandatory insertions sit at ``t'`` and ``t + tau'``; the ``2n - 2``
    extra insertions are distributed over the two windows and integrated
    over their ordered simplices.
    """
    _check_order(n, model)
    coupling = model.coupling()
    slot = np.asarray(slot, dtype=complex)
    total = np.zeros(len(e_z), dtype=complex)
    extra = 2 * n - 2
    for k in range(extra + 1):
        m = extra - k
        for past, wp in _simplex_weights(t_prime, t, k, inner_nodes):
            for fut, wf in _simplex_weights(t, t + tau_prime, m, inner_nodes):
                times = [t_prime, *past, *fut, t + tau_prime]
                total += wp * wf * _literal_chain(times, k + 1, coupling, propagator, slot,
                                                  e_y, rho_y, e_z, t, tau)
    return total


def xi_order1(model, propagator, slot, e_y, rho_y, e_z, t, tau, t_prime, tau_prime) -> np.ndarray:
    """First-order integrand at ``(t', tau')``; returns ``[z]``."""
    return xi_order_n(1, model, propagator, slot, e_y, rho_y, e_z, t, tau, t_prime, tau_prime)


# ---------------------------------------------------------------------------
# recursion over the grid


@dataclass(frozen=True)
class _Level:
    states: tuple                 # multisets of open labels, as sorted tuples
    open_count: np.ndarray
    trans: dict                   # label -> (n_states, n_prev) coefficient matrix


@lru_cache(maxsize=None)
def _build_levels(pair_key: tuple, n_mu: int, max_order: int):
    amp = np.array(pair_key).reshape(n_mu, n_mu)
    labels = [(b, mu) for mu in range(n_mu) for b in (LEFT, RIGHT)]
    n_ins = 2 * max_order

    def pair_amp(opener, closer):
        (bi, mi), (_, mj) = labels[opener], labels[closer]
        return amp[mi, mj] if bi == RIGHT else amp[mj, mi]

    levels = [_Level(((),), np.zeros(1), {})]
    for j in range(1, n_ins):
        prev = levels[-1].states
        nxt: dict = {}
        entries = []
        for ip, opens in enumerate(prev):
            for lab in range(len(labels)):
                if len(opens) + 1 <= n_ins - j:
                    entries.append((tuple(sorted(opens + (lab,))), ip, lab, 1.0))
                for o in set(opens):
                    rest = list(opens)
                    rest.remove(o)
                    c = opens.count(o) * pair_amp(o, lab)
                    if rest and c != 0.0:
                        entries.append((tuple(rest), ip, lab, c))
        for st, *_ in entries:
            nxt.setdefault(st, len(nxt))
        states = tuple(sorted(nxt, key=nxt.get))
        trans = {lab: np.zeros((len(states), len(prev))) for lab in range(len(labels))}
        for st, ip, lab, c in entries:
            trans[lab][nxt[st], ip] += c
        levels.append(_Level(states, np.array([len(s) for s in states], dtype=float), trans))
    # closing insertion for each order: single open label -> empty
    finals = {}
    for n in range(1, max_order + 1):
        states = levels[2 * n - 1].states
        finals[n] = {lab: np.array([pair_amp(s[0], lab) if len(s) == 1 else 0.0 for s in states])
                     for lab in range(len(labels))}
    return labels, levels, finals


class _Recursion:
    def __init__(self, coupling: CouplingStructure, max_order: int):
        self.ops = np.array(coupling.operators)
        self.rate = coupling.rate
        n_mu = len(self.ops)
        key = tuple(np.asarray(coupling.pair_amplitude, dtype=float).reshape(-1))
        self.labels, self.levels, self.finals = _build_levels(key, n_mu, max_order)
        self.max_order = max_order

    def act(self, lab: int, m: np.ndarray) -> np.ndarray:
        b, mu = self.labels[lab]
        s = self.ops[mu]
        return -1j * (s @ m) if b == LEFT else 1j * (m @ s)

    def insert(self, j: int, prev: np.ndarray) -> np.ndarray:
        """Insertion number ``j`` applied to level ``j - 1`` states."""
        lev = self.levels[j]
        out = None
        for lab, tr in lev.trans.items():
            if not tr.any():
                continue
            term = np.tensordot(tr, self.act(lab, prev), axes=(1, 0))
            out = term if out is None else out + term
        if out is None:
            out = np.zeros((len(lev.states),) + prev.shape[1:], dtype=complex)
        return out

    def close(self, n: int, arr: np.ndarray) -> np.ndarray:
        out = 0.0
        for lab, coef in self.finals[n].items():
            if coef.any():
                out = out + np.tensordot(coef, self.act(lab, arr), axes=(0, 0))
        if np.isscalar(out):
            return np.zeros(arr.shape[1:], dtype=complex)
        return out

    def decay(self, j: int, h: float) -> np.ndarray:
        return np.exp(-self.rate * h * self.levels[j].open_count)[:, None, None, None]


def default_nodes(span: float, tau_c: float, minimum: int = 41, per_tau_c: int = 20) -> int:
    """Nodes on ``[0, span]``: at least ``minimum`` and ``per_tau_c`` per correlation time."""
    if span <= 0:
        return minimum
    return max(minimum, int(math.ceil(per_tau_c * span / tau_c - 1e-9)) + 1)


def series_integrals(model, propagator, slots, e_y, rho_y, e_z, t: float, tau: float, max_order: int,
                     nodes: tuple[int, int] | None = None) -> np.ndarray:
    """``int_0^t dt' int_0^tau dtau' Xi^(n)[slot]`` for ``n = 1..max_order``.

    Returns an array ``[n-1, z, y, b]`` over orders, final effects,
    middle effects and the batch of slot matrices.
    """
    _check_order(max_order, model)
    slots = np.asarray(slots, dtype=complex)
    nb = slots.shape[0]
    out = np.zeros((max_order, len(e_z), len(e_y), nb), dtype=complex)
    if t <= 0 or tau <= 0 or model.gamma == 0:
        return out
    tau_c = model.tau_c
    if nodes is None:
        nodes = (default_nodes(t, tau_c), default_nodes(tau, tau_c))
    k1, k2 = nodes[0] - 1, nodes[1] - 1
    if k1 < 1 or k2 < 1:
        raise ValidationError("need at least two quadrature nodes per axis")
    h1, h2 = t / k1, tau / k2
    if 20.0 * max(h1, h2) > tau_c:
        log.debug("quadrature resolves tau_c with fewer than 20 nodes (h=%.3g, tau_c=%.3g)", max(h1, h2), tau_c)
    rec = _Recursion(model.coupling(), max_order)
    top = 2 * max_order - 1
    lam_past = propagator.matrices(h1 * np.arange(k1 + 1))
    lam_fut = propagator.matrices(tau - h2 * np.arange(k2 + 1))

    # past window: V[j] holds j insertions integrated up to the current node
    d = slots.shape[-1]
    v = {j: np.zeros((len(rec.levels[j].states), nb, d, d), dtype=complex) for j in range(1, top + 1)}
    ins_prev: dict = {}
    for k in range(k1 + 1):
        s0 = _apply(lam_past[k], slots)[None]
        ins_cur = {1: rec.insert(1, s0)}
        for j in range(1, top + 1):
            if j > 1:
                ins_cur[j] = rec.insert(j, v[j - 1])
            if k:
                d = rec.decay(j, h1)
                v[j] = d * v[j] + 0.5 * h1 * (d * ins_prev[j] + ins_cur[j])
        ins_prev = ins_cur

    w2 = np.full(k2 + 1, h2)
    w2[[0, -1]] *= 0.5
    for iy, (ey, ry) in enumerate(zip(e_y, rho_y)):
        f = {j: ry * np.einsum("ab,sxba->sx", ey, v[j])[..., None, None] for j in v}
        ins_prev = {j: rec.insert(j, f[j - 1]) for j in range(2, top + 1)}
        for k in range(k2 + 1):
            if k:
                ins_cur = {}
                f[1] = rec.decay(1, h2) * f[1]
                for j in range(2, top + 1):
                    ins_cur[j] = rec.insert(j, f[j - 1])
                    d = rec.decay(j, h2)
                    f[j] = d * f[j] + 0.5 * h2 * (d * ins_prev[j] + ins_cur[j])
                ins_prev = ins_cur
            for n in range(1, max_order + 1):
                fin = rec.close(n, f[2 * n - 1])
                out[n - 1, :, iy, :] += w2[k] * _traces(e_z, _apply(lam_fut[k], fin))
    return out


def _series_inputs(scheme: MeasurementScheme):
    e_y = scheme.middle.effects
    return e_y, e_y, scheme.last.effects


def joint_prob_perturbative(scheme: MeasurementScheme, model, rho0, t: float, tau: float, max_order: int = 2,
                            propagator=None, nodes=None) -> tuple[JointDistribution, SeriesResult]:
    """Markov term plus orders ``1..max_order`` of the series for ``P(z, y, x)``."""
    if propagator is None:
        propagator = default_propagator(model, s_max=max(t, tau) + 1.0)
    markov = markov_term(scheme, propagator, rho0, t, tau)
    states = build_post_first_states(rho0, scheme.first)
    e_y, rho_y, e_z = _series_inputs(scheme)
    raw = series_integrals(model, propagator, states.rho_x, e_y, rho_y, e_z, t, tau, max_order, nodes)
    orders = real_part_checked(raw, what="series contribution")
    table = markov.table + orders.sum(axis=0)
    used = nodes or (default_nodes(t, model.tau_c), default_nodes(tau, model.tau_c))
    total = table.sum()
    if abs(total - 1.0) > TOL.normalization:
        log.warning("joint table sums to %.15g", total)
    if table.min() < -1e-3:
        log.warning("joint table has negative entry %.3g at t=%g tau=%g", table.min(), t, tau)
    series = SeriesResult(orders, tuple(used), max_order, markov.table)
    return JointDistribution.for_scheme(table, scheme), series


def cpf_perturbative(scheme: MeasurementScheme, model, rho0, t: float, tau: float, y: float, max_order: int = 2,
                     propagator=None, nodes=None) -> CPFResult:
    """CPF correlation from the series evaluated on ``rho_yx``.

    The Markov term drops out exactly, so only integral terms appear.
    ``orders`` holds the contribution of each order.
    """
    if propagator is None:
        propagator = default_propagator(model, s_max=max(t, tau) + 1.0)
    states = build_post_first_states(rho0, scheme.first)
    iy = scheme.middle.index(y)
    e_y, rho_y, e_z = _series_inputs(scheme)
    lam_t = propagator.matrices([t])[0]
    p_yx = _traces(e_y, _apply(lam_t, states.rho_x))[iy]
    p_y = p_yx.sum().real
    if p_y <= TOL.conditioning:
        raise ConditioningError(f"P(y={y}) = {p_y:.3e} is too small to condition on")
    slots = states.rho_x * p_y - states.total[None] * p_yx[:, None, None]
    raw = series_integrals(model, propagator, slots, e_y[iy:iy + 1], rho_y[iy:iy + 1], e_z, t, tau,
                           max_order, nodes)[:, :, 0, :]
    per_order = np.einsum("z,nzx,x->n", scheme.last.values, raw, scheme.first.values) / p_y**2
    per_order = real_part_checked(per_order, what="CPF")
    per_order = np.atleast_1d(per_order)
    return CPFResult(y, float(per_order.sum()), t, tau, tuple(float(v) for v in per_order))
