"""Problem and result types shared across the package.

Matrices are plain 2-D float64 numpy arrays; every constructor copies its
inputs and marks them read-only so a built problem can be shared freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class EluniqError(Exception):
    """Base class for all errors raised by this package."""


class InvalidProblem(EluniqError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InfeasibleError(EluniqError):
    pass


class UnboundedError(EluniqError):
    pass


class NumericalLimitError(EluniqError):
    pass


class ResolutionInfeasible(EluniqError):
    def __init__(self, k, message="no admissible resolution cell"):
        self.k = k
        super().__init__(f"k={k + 1}: {message}")


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64, copy=True)
    if ndim == 2 and arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    arr.setflags(write=False)
    return arr


def as_matrix(a, cols=None):
    """Coerce ``a`` to a read-only float64 matrix.

    An empty input becomes a ``0 x cols`` matrix, which is how the
    zero-row equality or prior parts are expressed.
    """
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.size == 0 and cols is not None:
        arr = np.zeros((0, cols))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LinearSystem:
    """Equality part ``A x = b``; ``A`` may have zero rows."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A, 2))
        object.__setattr__(self, "b", _frozen(self.b, 1).reshape(-1))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1] if self.A.ndim == 2 else 0

    @classmethod
    def empty(cls, n: int) -> "LinearSystem":
        return cls(np.zeros((0, n)), np.zeros(0))


@dataclass(frozen=True)
class PriorConstraint:
    """Prior knowledge ``D x >= d``; ``D`` may have zero rows."""

    D: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "D", _frozen(self.D, 2))
        object.__setattr__(self, "d", _frozen(self.d, 1).reshape(-1))

    @property
    def p(self) -> int:
        return self.D.shape[0]

    @classmethod
    def none(cls, n: int) -> "PriorConstraint":
        return cls(np.zeros((0, n)), np.zeros(0))


@dataclass(frozen=True)
class SplitLift:
    """Maps original index ``k`` to lifted pair ``(k, k + n)``.

    The original variable is recovered as ``x[k] = xhat[k] - xhat[k + n]``.
    """

    n: int

    def functional(self, w) -> np.ndarray:
        """Lift a functional on the original variables to the 2n space."""
        w = np.asarray(w, dtype=float)
        return np.concatenate([w, -w])

    def unlift(self, xhat) -> np.ndarray:
        xhat = np.asarray(xhat, dtype=float)
        return xhat[: self.n] - xhat[self.n :]


@dataclass(frozen=True)
class MixedProblem:
    """The feasible set ``{x : A x = b, D x >= d}``."""

    system: LinearSystem
    prior: PriorConstraint
    lift: SplitLift | None = None

    @property
    def n(self) -> int:
        """Number of variables the problem is posed in (lifted if any)."""
        return self.system.n

    @property
    def n_original(self) -> int:
        return self.lift.n if self.lift is not None else self.system.n

    def element_functional(self, k: int) -> np.ndarray:
        """The functional that reads original element ``k``."""
        n0 = self.n_original
        if not 0 <= k < n0:
            raise IndexError(f"element index {k} out of range for n={n0}")
        e = np.zeros(n0)
        e[k] = 1.0
        return self.lift.functional(e) if self.lift is not None else e

    def contains(self, x, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        A, b = self.system.A, self.system.b
        D, d = self.prior.D, self.prior.d
        eq = np.all(np.abs(A @ x - b) <= tol * (1 + np.abs(b))) if A.shape[0] else True
        ineq = np.all(D @ x - d >= -tol * (1 + np.abs(d))) if D.shape[0] else True
        return bool(eq and ineq)


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    regularization: float = 1e-9

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.gap_tol > 0 and self.regularization > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


# Tolerances the analyses run at by default.  The element LPs of strongly
# blurring operators carry multipliers of 1e5 and more, and 1e-6 is the
# accuracy a double-precision interior point reliably certifies on them.
WORKING_OPTIONS = SolverOptions(feas_tol=1e-6, gap_tol=1e-6)


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_LIMIT = "NumericalLimit"


@dataclass(frozen=True)
class SolverResult:
    """Primal/dual output of one LP or QP solve.

    Duals follow ``Q x + q = Aeq^T y + G^T z`` with ``z >= 0``.
    """

    status: Status
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    objective: float
    iterations: int
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    complementarity: float = np.inf
    gap: float = np.inf
    ray: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def _shape_violations(name, M, rows_name, v, vname):
    out = []
    if M.ndim != 2:
        out.append(f"{name} must be a 2-D matrix")
        return out
    if v.ndim != 1:
        out.append(f"{vname} must be a vector")
    elif v.shape[0] != M.shape[0]:
        out.append(f"{vname} length mismatch: {v.shape[0]} != {rows_name}={M.shape[0]}")
    if not np.all(np.isfinite(M)):
        out.append(f"{name} has non-finite entries")
    if not np.all(np.isfinite(v)):
        out.append(f"{vname} has non-finite entries")
    return out


def validate(problem: MixedProblem) -> list[str]:
    """Return human-readable invariant violations; empty when well formed."""
    A, b = problem.system.A, problem.system.b
    D, d = problem.prior.D, problem.prior.d
    out = _shape_violations("A", A, "A.rows", b, "b")
    out += _shape_violations("D", D, "D.rows", d, "d")
    if A.ndim == 2 and A.shape[1] < 1:
        out.append("A must have at least one column")
    if A.ndim == 2 and D.ndim == 2 and D.shape[1] != A.shape[1]:
        out.append(f"column mismatch: D has {D.shape[1]} columns, A has {A.shape[1]}")
    lift = problem.lift
    if lift is not None and A.ndim == 2 and A.shape[1] != 2 * lift.n:
        out.append(f"lift expects {2 * lift.n} variables, problem has {A.shape[1]}")
    return out


def require_valid(problem: MixedProblem) -> None:
    violations = validate(problem)
    if violations:
        raise InvalidProblem(violations)
