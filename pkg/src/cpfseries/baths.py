"""Bath correlation models and unperturbed system propagators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .operators import PAULI, SuperOperator, ValidationError, vec
from .pseudomode import CutoffError, PseudomodeModel, default_cutoff

__all__ = [
    "ClassicalNoiseModel",
    "QuantumBathModel",
    "CouplingStructure",
    "UnperturbedPropagator",
    "AccuracyError",
    "ModelError",
    "correlation_eval",
    "decoherence_factor",
    "closed_form_amplitude",
    "solve_volterra_amplitude",
    "dephasing_propagator",
    "zero_T_decay_propagator",
    "finite_T_propagator",
    "amplitude_damping_map",
    "default_propagator",
]


class AccuracyError(ArithmeticError):
    """A numerical self-convergence check failed."""


class ModelError(ValueError):
    """Unsupported model, pairing rule or model/oracle combination."""


@dataclass(frozen=True)
class CouplingStructure:
    """System operators ``S^mu`` tagged with bath symbols and their pair rules.

    ``pair_amplitude[mu, nu]`` multiplies ``exp(-|dt| / tau_c)`` in the
    two-point function ``<X_mu(s_a) X_nu(s_b)>`` with ``X_mu`` standing
    to the left.
    """

    operators: tuple
    symbols: tuple
    pair_amplitude: np.ndarray
    rate: float

    def __post_init__(self):
        ops = np.array(self.operators, dtype=complex)
        h = sum(ops)
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise ModelError("coupling operators do not form a Hermitian pair set")
        object.__setattr__(self, "operators", tuple(ops))


@dataclass(frozen=True)
class ClassicalNoiseModel:
    """Stationary Gaussian noise with ``chi(t) = (gamma / 2 tau_c) exp(-|t| / tau_c)``."""

    gamma: float
    tau_c: float

    def __post_init__(self):
        if self.gamma < 0 or self.tau_c <= 0:
            raise ValidationError("need gamma >= 0 and tau_c > 0")

    kind = "dephasing"
    gaussian = True

    @property
    def amplitude(self) -> float:
        return self.gamma / (2.0 * self.tau_c)

    def correlation(self, dt, kind: str = "chi"):
        if kind != "chi":
            raise ModelError(f"classical noise has no correlation {kind!r}")
        return self.amplitude * np.exp(-np.abs(dt) / self.tau_c)

    def coupling(self) -> CouplingStructure:
        return CouplingStructure((PAULI["z"],), ("xi",), np.array([[self.amplitude]]), 1.0 / self.tau_c)


@dataclass(frozen=True)
class QuantumBathModel:
    """Bosonic bath seen through ``sigma_+ B(t) + sigma_- B^+(t)``."""

    gamma: float
    tau_c: float
    nbar: float = 0.0

    def __post_init__(self):
        if self.gamma < 0 or self.tau_c <= 0 or self.nbar < 0:
            raise ValidationError("need gamma >= 0, tau_c > 0 and nbar >= 0")

    kind = "bosonic"
    gaussian = True

    @property
    def amplitude(self) -> float:
        return self.gamma / (2.0 * self.tau_c)

    def correlation(self, dt, kind: str = "down"):
        base = self.amplitude * np.exp(-np.abs(dt) / self.tau_c)
        if kind == "down":
            return (self.nbar + 1.0) * base
        if kind == "up":
            return self.nbar * base
        raise ModelError(f"bosonic bath has no correlation {kind!r}")

    def coupling(self) -> CouplingStructure:
        a = self.amplitude
        # symbol 0 is B (paired with sigma_+), symbol 1 is B^+
        table = np.array([[0.0, (self.nbar + 1.0) * a], [self.nbar * a, 0.0]])
        return CouplingStructure((PAULI["+"], PAULI["-"]), ("B", "B+"), table, 1.0 / self.tau_c)

    def pseudomode(self, n_max: int | None = None) -> PseudomodeModel:
        return PseudomodeModel(self.gamma, self.tau_c, self.nbar, n_max)


_KIND_ALIASES = {"chi": "chi", "down": "down", "up": "up", "chi_down": "down", "chi_up": "up"}


def correlation_eval(model, kind: str, dt):
    """Closed-form correlation ``chi``, ``chi_down`` or ``chi_up`` at lag ``dt``."""
    try:
        k = _KIND_ALIASES[kind]
    except KeyError:
        raise ModelError(f"unknown correlation kind {kind!r}") from None
    return model.correlation(dt, k)


class UnperturbedPropagator:
    """Duration-indexed family ``s -> Lambda_s`` of qubit channels.

    ``matrices(s)`` returns stacked 4x4 column-stacked matrices; calling the
    object returns a :class:`SuperOperator`.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], provenance: str, dim: int = 2):
        self._fn = fn
        self.provenance = provenance
        self.dim = dim

    def matrices(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s < -1e-12):
            raise ValidationError("propagator durations must be non-negative")
        return self._fn(np.clip(s, 0.0, None))

    def __call__(self, s: float) -> SuperOperator:
        return SuperOperator(self.matrices(s)[0])


def decoherence_factor(model: ClassicalNoiseModel, s):
    """Gaussian average of ``exp(-2i int_0^s xi)`` for the exponential kernel."""
    s = np.asarray(s, dtype=float)
    tc = model.tau_c
    return np.exp(-2.0 * model.gamma * (s + tc * np.expm1(-s / tc)))


def _dephasing_maps(d: np.ndarray) -> np.ndarray:
    m = np.zeros((d.size, 4, 4), dtype=complex)
    # column-stacked indices: 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1)
    m[:, 0, 0] = 1.0
    m[:, 3, 3] = 1.0
    m[:, 1, 1] = d
    m[:, 2, 2] = d
    return m


def dephasing_propagator(model: ClassicalNoiseModel) -> UnperturbedPropagator:
    """Exact averaged dephasing channel: coherences times the decoherence factor."""
    return UnperturbedPropagator(lambda s: _dephasing_maps(decoherence_factor(model, s)), "analytic")


def amplitude_damping_map(g) -> np.ndarray:
    """Channels with excited amplitude ``g``: populations ``|g|^2``, coherences ``g``."""
    g = np.atleast_1d(np.asarray(g, dtype=complex))
    m = np.zeros((g.size, 4, 4), dtype=complex)
    p = np.abs(g) ** 2
    m[:, 0, 0] = p
    m[:, 3, 0] = 1.0 - p
    m[:, 3, 3] = 1.0
    m[:, 1, 1] = np.conj(g)
    m[:, 2, 2] = g
    return m


def closed_form_amplitude(gamma: float, tau_c: float, s):
    """Excited-state amplitude for the exponential kernel at zero temperature.

    ``G(s) = exp(-s / 2 tau_c) [cosh(d s / 2) + sinh(d s / 2) / (d tau_c)]`` with
    ``d = sqrt(1 / tau_c^2 - 2 gamma / tau_c)``, continued to the oscillatory
    and critical cases.
    """
    s = np.asarray(s, dtype=float)
    rad = 1.0 / tau_c**2 - 2.0 * gamma / tau_c
    env = np.exp(-s / (2.0 * tau_c))
    scale = 1.0 / tau_c**2
    if abs(rad) <= 1e-12 * scale:
        return env * (1.0 + s / (2.0 * tau_c))
    if rad > 0:
        d = math.sqrt(rad)
        # exp(-s/2tc) cosh(ds/2) written with decaying exponentials only
        lo = np.exp(-s * (1.0 / tau_c - d) / 2.0)
        hi = np.exp(-s * (1.0 / tau_c + d) / 2.0)
        return 0.5 * (lo + hi) + 0.5 * (lo - hi) / (d * tau_c)
    w = math.sqrt(-rad)
    return env * (np.cos(w * s / 2.0) + np.sin(w * s / 2.0) / (w * tau_c))


def _volterra_trapezoid(kernel: Callable, n: int, h: float) -> np.ndarray:
    """``G' = -int_0^s k(s-u) G(u) du`` on ``n`` trapezoid steps."""
    k = kernel(h * np.arange(n + 1))
    g = np.empty(n + 1)
    g[0] = 1.0
    f_prev = 0.0
    for m in range(n):
        j = m + 1
        # memory integral at node j without its G_j term
        partial = h * (0.5 * k[j] * g[0] + np.dot(k[j - 1:0:-1], g[1:j]))
        g[j] = (g[m] - 0.5 * h * (f_prev + partial)) / (1.0 + 0.25 * h * h * k[0])
        f_prev = partial + 0.5 * h * k[0] * g[j]
    return g


def solve_volterra_amplitude(kernel: Callable, s_max: float, h: float, check: bool = True,
                             tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoidal Volterra solution with one Richardson extrapolation.

    Solutions at steps ``h`` and ``h/2`` are combined as ``(4 G_{h/2} - G_h) / 3``
    on the coarse nodes. With ``check`` the same extrapolation from
    ``h/2, h/4`` must agree to ``tol``.
    """
    n = int(math.ceil(s_max / h - 1e-9))
    h = s_max / n if n else h
    g1 = _volterra_trapezoid(kernel, n, h)
    g2 = _volterra_trapezoid(kernel, 2 * n, h / 2)
    ext = (4.0 * g2[::2] - g1) / 3.0
    if check:
        g4 = _volterra_trapezoid(kernel, 4 * n, h / 4)
        ext2 = (4.0 * g4[::4] - g2[::2]) / 3.0
        err = float(np.max(np.abs(ext - ext2)))
        if err > tol:
            raise AccuracyError(f"Volterra self-convergence {err:.2e} exceeds {tol:.0e}; reduce the step")
    return h * np.arange(n + 1), ext


def _spline_family(s_tab: np.ndarray, maps: np.ndarray, provenance: str) -> UnperturbedPropagator:
    flat = maps.reshape(len(s_tab), -1)
    re = CubicSpline(s_tab, flat.real, axis=0)
    im = CubicSpline(s_tab, flat.imag, axis=0)
    s_hi = s_tab[-1]

    def fn(s):
        if np.any(s > s_hi * (1 + 1e-12)):
            raise ValidationError(f"duration {s.max()} beyond tabulated range {s_hi}")
        return (re(s) + 1j * im(s)).reshape(len(s), 4, 4)

    return UnperturbedPropagator(fn, provenance)


def _table_step(model) -> float:
    scale = model.tau_c if model.gamma == 0 else min(model.tau_c, 1.0 / model.gamma)
    return scale / 50.0


def zero_T_decay_propagator(model: QuantumBathModel, s_max: float = 10.0,
                            method: str = "volterra") -> UnperturbedPropagator:
    """Exact zero-temperature decay channel.

    ``method="volterra"`` solves the amplitude equation numerically and
    interpolates; ``method="closed"`` evaluates the closed form.
    """
    if model.nbar != 0:
        raise ModelError("zero-temperature propagator requires nbar = 0")
    if model.gamma == 0:
        return UnperturbedPropagator(lambda s: amplitude_damping_map(np.ones_like(s)), "analytic")
    if method == "closed":
        return UnperturbedPropagator(
            lambda s: amplitude_damping_map(closed_form_amplitude(model.gamma, model.tau_c, s)), "analytic")
    if method != "volterra":
        raise ModelError(f"unknown method {method!r}")
    h = min(model.tau_c / 20.0, _table_step(model))
    s_tab, g = solve_volterra_amplitude(lambda u: model.correlation(u, "down"), s_max, h)
    spline = CubicSpline(s_tab, g)

    def fn(s):
        if np.any(s > s_tab[-1] * (1 + 1e-12)):
            raise ValidationError(f"duration {s.max()} beyond tabulated range {s_tab[-1]}")
        return amplitude_damping_map(spline(s))

    return UnperturbedPropagator(fn, "volterra")


@lru_cache(maxsize=16)
def _pseudomode_table(model: QuantumBathModel, s_max: float, n_max: int | None, tol: float = 1e-8):
    h = _table_step(model)
    n_max = default_cutoff(model.nbar) if n_max is None else n_max
    s_tab, maps = model.pseudomode(n_max).tabulate_reduced(s_max, h)
    if model.nbar > 0:
        _, maps2 = model.pseudomode(n_max + 2).tabulate_reduced(s_max, h)
        err = float(np.max(np.abs(maps2 - maps)))
        if err > tol:
            raise CutoffError(f"Fock cutoff {n_max} not converged (change {err:.2e})")
    return s_tab, maps


def _rate_ansatz_maps(g_dn: np.ndarray, g_up: np.ndarray) -> np.ndarray:
    """Channels of ``Gamma_dn(s) D[sigma_-] + Gamma_up(s) D[sigma_+]`` with
    ``Gamma(s) = -2 d/ds ln|G(s)|`` for each amplitude.

    With ``E = |G_dn G_up|^2`` the excited population obeys
    ``p(s) = E(s) [p(0) + q(s) Tr rho]`` where
    ``q(s) = int |G_dn|^-2 d(|G_up|^-2)``.
    """
    a2, b2 = np.abs(g_dn) ** 2, np.abs(g_up) ** 2
    if np.any(a2 <= 1e-300) or np.any(b2 <= 1e-300):
        raise ModelError("rate ansatz needs non-vanishing amplitudes; use the pseudomode propagator")
    f, w = 1.0 / a2, 1.0 / b2
    q = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(w))])
    e = a2 * b2
    m = np.zeros((g_dn.size, 4, 4), dtype=complex)
    m[:, 0, 0] = e * (1.0 + q)
    m[:, 0, 3] = e * q
    m[:, 3, 0] = 1.0 - m[:, 0, 0]
    m[:, 3, 3] = 1.0 - m[:, 0, 3]
    c = g_dn * g_up
    m[:, 1, 1] = np.conj(c)
    m[:, 2, 2] = c
    return m


def finite_T_propagator(model: QuantumBathModel, s_max: float = 10.0, method: str = "pseudomode",
                        n_max: int | None = None) -> UnperturbedPropagator:
    """Reduced propagator of the thermal bath.

    The default tabulates the pseudomode embedding. ``method="ansatz"``
    takes the zero-temperature decay built from ``chi_down`` and adds a
    pumping channel of the same form built from ``chi_up``, both entering
    as time-dependent rates.
    """
    if method == "pseudomode":
        # whole units so that nearby requests share one cached table
        s_tab, maps = _pseudomode_table(model, float(math.ceil(s_max)), n_max)
        return _spline_family(s_tab, maps, "pseudomode-tabulated")
    if method != "ansatz":
        raise ModelError(f"unknown method {method!r}")
    h = min(model.tau_c / 20.0, _table_step(model))
    s_tab, g_dn = solve_volterra_amplitude(lambda u: model.correlation(u, "down"), s_max, h)
    if model.nbar > 0:
        _, g_up = solve_volterra_amplitude(lambda u: model.correlation(u, "up"), s_max, h)
    else:
        g_up = np.ones_like(g_dn)
    return _spline_family(s_tab, _rate_ansatz_maps(g_dn, g_up), "ansatz")


def default_propagator(model, s_max: float = 10.0, **kw) -> UnperturbedPropagator:
    if isinstance(model, ClassicalNoiseModel):
        return dephasing_propagator(model)
    if isinstance(model, QuantumBathModel):
        if model.nbar == 0:
            return zero_T_decay_propagator(model, s_max, **kw)
        return finite_T_propagator(model, s_max, **kw)
    raise ModelError(f"unsupported model {type(model).__name__}")
