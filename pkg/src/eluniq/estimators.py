"""Reference reconstructions: basis pursuit, NNLS and box-constrained minimum norm."""

from __future__ import annotations

import numpy as np

from .model import InfeasibleError, LinearSystem, NumericalLimitError, SolverOptions, Status, WORKING_OPTIONS
from .priors import BoxSpec, bp_solution
from .solver import QpSpec, solve, solve_nnls_activeset


def basis_pursuit(system: LinearSystem, opts: SolverOptions | None = None) -> np.ndarray:
    """A minimiser of ``||x||_1`` subject to ``A x = b``."""
    return bp_solution(system, opts)


def nnls_estimate(system: LinearSystem) -> np.ndarray:
    """Active-set solution of ``min ||A x - b||_2`` over ``x >= 0``."""
    if system.m == 0:
        return np.zeros(system.n)
    return solve_nnls_activeset(system.A, system.b)


def box_minnorm_estimate(system: LinearSystem, box: BoxSpec, opts: SolverOptions | None = None) -> np.ndarray:
    """The minimum 2-norm solution of ``A x = b`` inside the box."""
    n = system.n
    if box.dmin.shape[0] != n:
        raise ValueError(f"box has {box.dmin.shape[0]} entries, system has {n} unknowns")
    I = np.eye(n)
    spec = QpSpec(
        I,
        np.zeros(n),
        system.A,
        system.b,
        np.vstack([I, -I]),
        np.concatenate([box.dmin, -box.dmax]),
    )
    res = solve(spec, opts or WORKING_OPTIONS)
    if res.status is Status.INFEASIBLE:
        raise InfeasibleError("no solution of A x = b lies inside the box")
    if not res.ok:
        raise NumericalLimitError(f"minimum-norm QP stopped at {res.status.value}")
    return np.clip(res.x, box.dmin, box.dmax)
