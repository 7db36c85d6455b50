"""Dense operator and superoperator algebra.

Operators are plain ``numpy`` arrays. Superoperators act on column-stacked
operators, ``vec(X) = X.reshape(-1, order="F")``, so that

    vec(A X B) = (B^T kron A) vec(X).

Left multiplication ``X -> A X`` is ``kron(I, A)`` and right multiplication
``X -> X B`` is ``kron(B^T, I)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

__all__ = [
    "Tolerances",
    "TOL",
    "ValidationError",
    "TimeGrid",
    "SuperOperator",
    "vec",
    "unvec",
    "spre",
    "spost",
    "commutator_superop",
    "dissipator",
    "time_ordered_exp",
    "step_propagators",
    "partial_trace",
    "projector_P",
    "projector_Q",
    "choi_matrix",
    "is_completely_positive",
    "validate_hermitian",
    "validate_density_matrix",
    "PAULI",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module."""

    hermitian: float = 1e-12
    trace: float = 1e-12
    psd: float = 1e-10
    trace_preserving: float = 1e-10
    complete_positivity: float = 1e-8
    normalization: float = 1e-12
    imaginary_residue: float = 1e-10
    conditioning: float = 1e-12
    grid: float = 1e-12


TOL = Tolerances()


class ValidationError(ValueError):
    """Raised when an input violates a structural precondition."""


PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # |+> = (1, 0) is the upper (excited) level
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stack the last two axes of ``x``."""
    x = np.asarray(x)
    if x.ndim == 2:
        return x.reshape(-1, order="F")
    d = x.shape[-1]
    return np.swapaxes(x, -1, -2).reshape(x.shape[:-2] + (d * d,))


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.shape[-1])))
    if v.ndim == 1:
        return v.reshape(d, d, order="F")
    return np.swapaxes(v.reshape(v.shape[:-1] + (d, d)), -1, -2)


def spre(a: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> a X``."""
    d = a.shape[0]
    return np.kron(np.eye(d), a)


def spost(b: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> X b``."""
    d = b.shape[0]
    return np.kron(b.T, np.eye(d))


def validate_hermitian(h: np.ndarray, tol: float = TOL.hermitian, name: str = "operator") -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.max(np.abs(h - h.conj().T)) > tol:
        raise ValidationError(f"{name} is not Hermitian")
    return h


def validate_density_matrix(rho: np.ndarray, name: str = "state") -> np.ndarray:
    rho = validate_hermitian(rho, name=name)
    if abs(np.trace(rho) - 1.0) > TOL.trace:
        raise ValidationError(f"{name} has trace {np.trace(rho).real:.3g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -TOL.psd:
        raise ValidationError(f"{name} is not positive semidefinite")
    return rho


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[t_start, t_end]`` with ``n_steps`` intervals."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValidationError("n_steps must be positive")
        if not self.t_end > self.t_start:
            raise ValidationError("t_end must exceed t_start")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.n_steps + 1)

    def index(self, t: float) -> int:
        """Index of the node at time ``t``; raises if ``t`` is off-grid."""
        k = (t - self.t_start) / self.h
        kr = int(round(k))
        if abs(k - kr) > 1e-9 * max(1.0, abs(k)) or not 0 <= kr <= self.n_steps:
            raise ValidationError(f"time {t} is not a node of the grid")
        return kr


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on ``dim x dim`` operators, stored in column-stacked form."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = m.shape[0]
        d = int(round(np.sqrt(n)))
        if m.shape != (n, n) or d * d != n:
            raise ValidationError(f"superoperator matrix has bad shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    @classmethod
    def identity(cls, d: int) -> "SuperOperator":
        return cls(np.eye(d * d, dtype=complex))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return unvec(vec(x) @ self.matrix.T, self.dim)

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix @ other.matrix)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix - other.matrix)

    def __mul__(self, c: complex) -> "SuperOperator":
        return SuperOperator(c * self.matrix)

    __rmul__ = __mul__

    def trace_defect(self) -> float:
        """Max deviation of ``Tr(S[X])`` from ``Tr(X)`` over matrix units."""
        d = self.dim
        tr_row = vec(np.eye(d)).conj()
        return float(np.max(np.abs(tr_row @ self.matrix - tr_row)))

    def is_trace_preserving(self, tol: float = TOL.trace_preserving) -> bool:
        return self.trace_defect() <= tol

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def commutator_superop(h: np.ndarray) -> SuperOperator:
    """``X -> -i (h X - X h)`` for Hermitian ``h``."""
    h = validate_hermitian(h, name="Hamiltonian")
    return SuperOperator(-1j * (spre(h) - spost(h)))


def dissipator(l: np.ndarray) -> SuperOperator:
    """``X -> l X l^+ - {l^+ l, X}/2``."""
    l = np.asarray(l, dtype=complex)
    ld = l.conj().T
    ll = ld @ l
    return SuperOperator(spre(l) @ spost(ld) - 0.5 * (spre(ll) + spost(ll)))


Generator = Union[SuperOperator, Callable[[float], SuperOperator]]


def _as_matrix(gen, t: float) -> np.ndarray:
    if isinstance(gen, SuperOperator):
        return gen.matrix
    out = gen(t)
    return out.matrix if isinstance(out, SuperOperator) else np.asarray(out)


def step_propagators(gen: Generator, grid: TimeGrid, k_a: int = 0, k_b: int | None = None) -> list[np.ndarray]:
    """Midpoint step exponentials ``exp(h L(t_k + h/2))`` for steps ``k_a..k_b-1``."""
    if k_b is None:
        k_b = grid.n_steps
    h = grid.h
    if isinstance(gen, SuperOperator):
        u = expm(h * gen.matrix)
        return [u] * (k_b - k_a)
    nodes = grid.nodes
    return [expm(h * _as_matrix(gen, nodes[k] + 0.5 * h)) for k in range(k_a, k_b)]


def time_ordered_exp(gen: Generator, t_a: float, t_b: float, grid: TimeGrid) -> SuperOperator:
    """Time-ordered exponential of ``gen`` from ``t_a`` to ``t_b``.

    Composes per-step midpoint exponentials on ``grid``; both endpoints
    must be grid nodes. Later steps act to the left.
    """
    if t_b < t_a:
        raise ValidationError("time_ordered_exp needs t_b >= t_a")
    k_a, k_b = grid.index(t_a), grid.index(t_b)
    d2 = _as_matrix(gen, t_a).shape[0]
    out = np.eye(d2, dtype=complex)
    for u in step_propagators(gen, grid, k_a, k_b):
        out = u @ out
    return SuperOperator(out)


def partial_trace(m: np.ndarray, dims: tuple[int, int], keep: str = "system") -> np.ndarray:
    """Partial trace of a bipartite operator with factor dimensions ``dims``.

    ``keep`` is ``"system"`` (trace out the second factor) or
    ``"environment"`` (trace out the first).
    """
    m = np.asarray(m)
    ds, de = dims
    if m.shape[-2:] != (ds * de, ds * de):
        raise ValidationError(f"operator shape {m.shape} does not match dims {dims}")
    t = m.reshape(m.shape[:-2] + (ds, de, ds, de))
    if keep == "system":
        return np.einsum("...iaja->...ij", t)
    if keep == "environment":
        return np.einsum("...iaib->...ab", t)
    raise ValidationError(f"unknown subsystem tag {keep!r}")


def _check_env_state(sigma_e: np.ndarray) -> np.ndarray:
    return validate_density_matrix(sigma_e, name="reference environment state")


def projector_P(sigma_e: np.ndarray, d_s: int) -> SuperOperator:
    """``X -> Tr_e(X) kron sigma_e`` on a ``d_s * d_e`` bipartite space."""
    sigma_e = _check_env_state(sigma_e)
    d_e = sigma_e.shape[0]
    d = d_s * d_e
    cols = []
    for j in range(d):
        for i in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            cols.append(vec(np.kron(partial_trace(e, (d_s, d_e)), sigma_e)))
    # cols were generated in column-stacked order of the input basis
    return SuperOperator(np.array(cols).T)


def projector_Q(sigma_e: np.ndarray, d_s: int) -> SuperOperator:
    p = projector_P(sigma_e, d_s)
    return SuperOperator.identity(p.dim) - p


def choi_matrix(s: SuperOperator) -> np.ndarray:
    """``sum_ij |i><j| kron S[|i><j|]``."""
    d = s.dim
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            c += np.kron(e, s(e))
    return c


def is_completely_positive(s: SuperOperator, tol: float = TOL.complete_positivity) -> bool:
    c = choi_matrix(s)
    c = 0.5 * (c + c.conj().T)
    return bool(np.linalg.eigvalsh(c).min() >= -tol)
