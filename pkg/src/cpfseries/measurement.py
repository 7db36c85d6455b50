"""Three-time measurement schemes and the statistics built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .operators import TOL, SuperOperator, ValidationError, validate_density_matrix

__all__ = [
    "MeasurementSet",
    "MeasurementScheme",
    "JointDistribution",
    "CPFResult",
    "PostFirstStates",
    "ConditioningError",
    "ConsistencyError",
    "projective_set",
    "scheme_preset",
    "initial_state",
    "build_post_first_states",
    "rho_yx",
    "prob_y",
    "marginals",
    "cpf_from_joint",
    "real_part_checked",
]


class ConditioningError(ValueError):
    """The conditioning outcome has (numerically) zero probability."""


class ConsistencyError(ArithmeticError):
    """An assembled quantity failed an internal consistency check."""


def real_part_checked(z, tol: float = TOL.imaginary_residue, what: str = "value"):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        resid = float(np.max(np.abs(z.imag), initial=0.0))
        if resid > tol:
            raise ConsistencyError(f"{what} has imaginary residue {resid:.3e}")
        z = z.real
    return z if z.ndim else float(z)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Measurement operators ``Omega_i`` with outcome values ``O_i``."""

    operators: tuple
    outcomes: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(o, dtype=complex) for o in self.operators)
        outs = tuple(float(o) for o in self.outcomes)
        if len(ops) != len(outs) or not ops:
            raise ValidationError("need one outcome value per measurement operator")
        d = ops[0].shape[0]
        if any(o.shape != (d, d) for o in ops):
            raise ValidationError("measurement operators must share a square shape")
        total = sum(o.conj().T @ o for o in ops)
        if np.max(np.abs(total - np.eye(d))) > TOL.normalization:
            raise ValidationError("measurement operators do not resolve the identity")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "outcomes", outs)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def effects(self) -> np.ndarray:
        return np.array([o.conj().T @ o for o in self.operators])

    @property
    def values(self) -> np.ndarray:
        return np.array(self.outcomes)

    def index(self, outcome: float) -> int:
        for i, o in enumerate(self.outcomes):
            if abs(o - outcome) < 1e-12:
                return i
        raise ValidationError(f"outcome {outcome} not in {self.outcomes}")

    def is_projective(self, tol: float = TOL.normalization) -> bool:
        return all(np.max(np.abs(e @ e - e)) <= tol for e in self.effects)


@dataclass(frozen=True, eq=False)
class MeasurementScheme:
    first: MeasurementSet
    middle: MeasurementSet
    last: MeasurementSet
    name: str = "custom"

    def __post_init__(self):
        if not self.middle.is_projective():
            raise ValidationError("the intermediate measurement must be projective")
        if len({self.first.dim, self.middle.dim, self.last.dim}) != 1:
            raise ValidationError("measurement sets act on different dimensions")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.last.operators), len(self.middle.operators), len(self.first.operators))


_BASES = {
    "z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    "x": (np.array([1, 1], dtype=complex) / np.sqrt(2), np.array([1, -1], dtype=complex) / np.sqrt(2)),
    "y": (np.array([1, 1j], dtype=complex) / np.sqrt(2), np.array([1, -1j], dtype=complex) / np.sqrt(2)),
}


def projective_set(axis: str) -> MeasurementSet:
    """Qubit projective measurement along a Bloch axis, outcomes +1 / -1."""
    try:
        up, down = _BASES[axis]
    except KeyError:
        raise ValidationError(f"unknown axis {axis!r}") from None
    return MeasurementSet((np.outer(up, up.conj()), np.outer(down, down.conj())), (1.0, -1.0))


def scheme_preset(name: str) -> MeasurementScheme:
    """Named schemes such as ``"zzz"``, ``"xzx"`` or ``"xxx"`` (first, middle, last)."""
    if len(name) != 3:
        raise ValidationError(f"scheme preset must name three axes, got {name!r}")
    a, b, c = (projective_set(ax) for ax in name)
    return MeasurementScheme(a, b, c, name=name)


def initial_state(p: float) -> np.ndarray:
    """``|psi> = sqrt(p)|+> + sqrt(1-p)|->`` as a density matrix."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]")
    psi = np.array([np.sqrt(p), np.sqrt(1.0 - p)], dtype=complex)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True, eq=False)
class PostFirstStates:
    """Unnormalized states ``Omega_x rho0 Omega_x^+`` and their sum."""

    rho_x: np.ndarray
    total: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return np.real(np.einsum("xii->x", self.rho_x))


def build_post_first_states(rho0: np.ndarray, first: MeasurementSet) -> PostFirstStates:
    rho0 = validate_density_matrix(rho0, name="initial state")
    rx = np.array([o @ rho0 @ o.conj().T for o in first.operators])
    return PostFirstStates(rx, rx.sum(axis=0))


def _traces(effect: np.ndarray, ops: np.ndarray) -> np.ndarray:
    return np.einsum("ij,...ji->...", effect, ops)


def prob_y(states: PostFirstStates, lam_t: SuperOperator, e_y: np.ndarray) -> float:
    """``P(y) = sum_x Tr(E_y Lambda_t[rho_x])``."""
    return real_part_checked(np.sum(_traces(e_y, lam_t(states.rho_x))), what="P(y)")


def rho_yx(states: PostFirstStates, lam_t: SuperOperator, e_y: np.ndarray, x: int):
    """Auxiliary matrix ``rho_x P(y) - rho P(y,x)``.

    Returns ``(matrix, degenerate)``; ``degenerate`` flags a zero-weight
    branch (``P(x) = 0``) or a vanishing matrix (``rho_x / P(x) = rho``).
    """
    rx = states.rho_x[x]
    p_y = _traces(e_y, lam_t(states.total))
    p_yx = _traces(e_y, lam_t(rx))
    m = rx * p_y - states.total * p_yx
    degenerate = states.probs[x] <= TOL.conditioning or np.max(np.abs(m)) <= TOL.conditioning
    return m, bool(degenerate)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Table ``P[z, y, x]`` over last, middle and first outcomes."""

    table: np.ndarray
    z_values: tuple = (1.0, -1.0)
    y_values: tuple = (1.0, -1.0)
    x_values: tuple = (1.0, -1.0)
    stderr: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 3:
            raise ValidationError("joint table must be three-dimensional")
        if t.shape != (len(self.z_values), len(self.y_values), len(self.x_values)):
            raise ValidationError("joint table shape does not match outcome labels")
        object.__setattr__(self, "table", t)

    @classmethod
    def for_scheme(cls, table, scheme: MeasurementScheme, stderr=None) -> "JointDistribution":
        return cls(table, scheme.last.outcomes, scheme.middle.outcomes, scheme.first.outcomes, stderr)

    def total(self) -> float:
        return float(self.table.sum())

    def y_index(self, y: float) -> int:
        for i, v in enumerate(self.y_values):
            if abs(v - y) < 1e-12:
                return i
        raise ValidationError(f"outcome y={y} not in {self.y_values}")

    def checksum(self) -> float:
        """Weighted sum used as a compact fingerprint of the table."""
        w = np.arange(1, self.table.size + 1, dtype=float)
        return float(self.table.reshape(-1) @ w)


def marginals(j: JointDistribution) -> dict[str, np.ndarray]:
    p = j.table
    return {
        "zy": p.sum(axis=2),
        "yx": p.sum(axis=0),
        "y": p.sum(axis=(0, 2)),
        "x": p.sum(axis=(0, 1)),
        "z": p.sum(axis=(1, 2)),
    }


@dataclass(frozen=True)
class CPFResult:
    """Conditional past-future correlation for one conditioning outcome."""

    y: float
    value: float
    t: float = float("nan")
    tau: float = float("nan")
    orders: tuple = field(default_factory=tuple)


def cpf_from_joint(j: JointDistribution, y: float, t: float = float("nan"), tau: float = float("nan"),
                   eps: float = TOL.conditioning) -> CPFResult:
    """CPF correlation from a joint table.

    ``sum_zx O_z O_x [P(z,y,x) P(y) - P(z,y) P(y,x)] / P(y)^2``.
    """
    iy = j.y_index(y)
    p = j.table[:, iy, :]
    py = p.sum()
    if py <= eps:
        raise ConditioningError(f"P(y={y}) = {py:.3e} is too small to condition on")
    oz = np.asarray(j.z_values)
    ox = np.asarray(j.x_values)
    pzy = p.sum(axis=1)
    pyx = p.sum(axis=0)
    cov = p * py - np.outer(pzy, pyx)
    return CPFResult(y, float(oz @ cov @ ox / py**2), t, tau)
