"""Prior-knowledge constructions expressed as ``D x >= d`` or as a lifted problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    InfeasibleError,
    LinearSystem,
    MixedProblem,
    NumericalLimitError,
    PriorConstraint,
    SolverOptions,
    SplitLift,
    Status,
    WORKING_OPTIONS,
)
from .solver import QpSpec, solve


@dataclass(frozen=True)
class BoxSpec:
    dmin: np.ndarray
    dmax: np.ndarray

    def __post_init__(self):
        dmin = np.array(self.dmin, dtype=float).reshape(-1)
        dmax = np.array(self.dmax, dtype=float).reshape(-1)
        if dmin.shape != dmax.shape:
            raise ValueError("dmin and dmax must have the same length")
        if np.any(dmin > dmax):
            raise ValueError("dmin must not exceed dmax")
        dmin.setflags(write=False)
        dmax.setflags(write=False)
        object.__setattr__(self, "dmin", dmin)
        object.__setattr__(self, "dmax", dmax)

    @classmethod
    def uniform(cls, n: int, lo: float, hi: float) -> "BoxSpec":
        return cls(np.full(n, lo), np.full(n, hi))


@dataclass(frozen=True)
class LiftedBpProblem:
    problem: MixedProblem
    alpha: float


def nonneg_prior(n: int) -> PriorConstraint:
    if n < 1:
        raise ValueError("n must be at least 1")
    return PriorConstraint(np.eye(n), np.zeros(n))


def box_prior(spec: BoxSpec) -> PriorConstraint:
    n = spec.dmin.shape[0]
    I = np.eye(n)
    return PriorConstraint(np.vstack([I, -I]), np.concatenate([spec.dmin, -spec.dmax]))


def _split_l1_lp(system: LinearSystem, opts: SolverOptions | None):
    # min 1'(u + v)  s.t.  A(u - v) = b,  u, v >= 0
    m, n = system.A.shape
    Aeq = np.hstack([system.A, -system.A])
    res = solve(QpSpec.lp(np.ones(2 * n), Aeq, system.b, np.eye(2 * n), np.zeros(2 * n)), opts or WORKING_OPTIONS)
    if res.status is Status.INFEASIBLE:
        raise InfeasibleError("A x = b has no solution")
    if not res.ok:
        raise NumericalLimitError(f"basis pursuit LP ended with status {res.status.value}")
    return res


def bp_alpha(system: LinearSystem, opts: SolverOptions | None = None) -> float:
    """Smallest 1-norm over the solutions of ``A x = b``."""
    return float(_split_l1_lp(system, opts).objective)


def bp_solution(system: LinearSystem, opts: SolverOptions | None = None) -> np.ndarray:
    res = _split_l1_lp(system, opts)
    n = system.n
    return res.x[:n] - res.x[n:]


def bp_lift(system: LinearSystem, alpha: float) -> LiftedBpProblem:
    """Non-negative 2n-variable system whose solutions map onto ``{A x = b, ||x||_1 <= alpha}``."""
    m, n = system.A.shape
    A_hat = np.vstack([np.hstack([system.A, -system.A]), np.ones((1, 2 * n))])
    b_hat = np.concatenate([system.b, [alpha]])
    problem = MixedProblem(LinearSystem(A_hat, b_hat), nonneg_prior(2 * n), lift=SplitLift(n))
    return LiftedBpProblem(problem, float(alpha))


def nn_sigma(system: LinearSystem, opts: SolverOptions | None = None) -> float:
    """``min ||A x - b||_inf`` over ``x >= 0``, as an LP in ``(x, t)``."""
    m, n = system.A.shape
    if m == 0:
        return 0.0
    # variables (x, t): minimise t with -t <= A x - b <= t, x >= 0
    c = np.zeros(n + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    G = np.vstack(
        [
            np.hstack([-system.A, ones]),
            np.hstack([system.A, ones]),
            np.hstack([np.eye(n), np.zeros((n, 1))]),
        ]
    )
    h = np.concatenate([-system.b, system.b, np.zeros(n)])
    res = solve(QpSpec.lp(c, None, None, G, h), opts or WORKING_OPTIONS)
    if not res.ok:
        raise NumericalLimitError(f"sigma LP ended with status {res.status.value}")
    return max(0.0, float(res.objective))


def denoise_nn_problem(system: LinearSystem, sigma: float) -> MixedProblem:
    """``{x : ||A x - b||_inf <= sigma, x >= 0}`` with an empty equality part."""
    m, n = system.A.shape
    A, b = system.A, system.b
    D = np.vstack([-A, A, np.eye(n)])
    d = np.concatenate([-b - sigma, b - sigma, np.zeros(n)])
    return MixedProblem(LinearSystem.empty(n), PriorConstraint(D, d))
