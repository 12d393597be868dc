"""Resolution cells: the most concentrated functional pinned by the data.

For element ``k`` a cell is a vector ``c >= 0`` with ``c[k] = 1`` such that
``c'x`` takes the same value everywhere on the feasible set.  Among such
vectors the one minimising a distance-weighted 2-norm is chosen; its spread
around ``k`` says how finely the data resolve that element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    LinearSystem,
    MixedProblem,
    NumericalLimitError,
    PriorConstraint,
    ResolutionInfeasible,
    SolverOptions,
    Status,
    WORKING_OPTIONS,
    require_valid,
)
from .solver import QpSpec, solve
from .uniqueness import DEFAULT_TOL, UniquenessCertificate, _map, analyze_element

# entries at or below this are treated as interior-point residue and pruned
SUPPORT_CUTOFF = 1e-6

# Ridge weights on the multipliers of the two-sided cell QP, tried in order.
# Without one the QP is degenerate: cells that are only certifiable with
# multipliers of 1e5 and more stall the interior point short of tolerance.
MULTIPLIER_PENALTIES = (1e-6, 1e-5, 1e-4)


@dataclass(frozen=True)
class DistanceWeights:
    """``weight(i, k) = |i - k|`` in sample units."""

    def __call__(self, n: int, k: int) -> np.ndarray:
        return np.abs(np.arange(n, dtype=float) - k)


@dataclass(frozen=True)
class ResolutionCell:
    k: int
    c: np.ndarray
    certificate: UniquenessCertificate
    objective: float
    resolution_samples: float
    lowres_value: float


def resolution_metric(c, k: int) -> float:
    """One plus twice the standard deviation of the distribution proportional to ``c``."""
    c = np.asarray(c, dtype=float)
    c = np.where(c > 0, c, 0.0)
    total = c.sum()
    if not total > 0:
        raise ValueError("c must have positive mass")
    offsets = np.arange(c.size) - k
    return 1.0 + 2.0 * math.sqrt(float(offsets**2 @ c) / total)


@dataclass(frozen=True)
class _Layout:
    """Column offsets of the stacked QP variables."""

    m: int
    p: int
    n: int
    twin: bool  # separate (y, z) for the upper and lower halves

    @property
    def size(self):
        half = self.m + self.p
        return (2 * half if self.twin else self.m) + self.n

    @property
    def c(self):
        return slice(self.size - self.n, self.size)

    def part(self, which):
        half = self.m + self.p
        base = half if (which == "minus" and self.twin) else 0
        return slice(base, base + self.m), slice(base + self.m, base + half)


def _cell_qp(problem: MixedProblem, k, weights, pruned, ec: bool, penalty: float = 0.0):
    A, b = problem.system.A, problem.system.b
    D, d = problem.prior.D, problem.prior.d
    m, n = A.shape
    p = 0 if ec else D.shape[0]
    lay = _Layout(m, p, n, twin=not ec)
    N = lay.size
    w = np.asarray(weights(n, k), dtype=float)
    Q = np.zeros((N, N))
    Q[lay.c, lay.c] = np.diag(2.0 * w**2)
    if penalty:
        mult = np.arange(lay.c.start)
        Q[mult, mult] = 2.0 * penalty

    rows, rhs = [], []

    def eq(row, val):
        rows.append(row)
        rhs.append(val)

    halves = ("plus",) if ec else ("plus", "minus")
    for half in halves:
        ys, zs = lay.part(half)
        block = np.zeros((n, N))
        block[:, ys] = A.T
        block[:, zs] = D.T if p else 0.0
        block[:, lay.c] = -np.eye(n)
        for i in range(n):
            eq(block[i], 0.0)
    if not ec:
        (yp, zp), (ym, zm) = lay.part("plus"), lay.part("minus")
        row = np.zeros(N)
        row[yp], row[zp], row[ym], row[zm] = b, d, -b, -d
        eq(row, 0.0)
    pin = np.zeros(N)
    pin[lay.c.start + k] = 1.0
    eq(pin, 1.0)
    for i in pruned:
        row = np.zeros(N)
        row[lay.c.start + i] = 1.0
        eq(row, 0.0)

    grows = []
    if not ec:
        for half, sign in (("plus", -1.0), ("minus", 1.0)):
            _, zs = lay.part(half)
            g = np.zeros((p, N))
            g[:, zs] = sign * np.eye(p)
            grows.append(g)
    g = np.zeros((n, N))
    g[:, lay.c] = np.eye(n)
    grows.append(g)
    G = np.vstack(grows)
    spec = QpSpec(Q, np.zeros(N), np.array(rows), np.array(rhs), G, np.zeros(G.shape[0]))
    return spec, lay


def _solve_cell(problem, k, weights, opts, ec):
    opts = opts or WORKING_OPTIONS
    penalties = (0.0,) if ec else MULTIPLIER_PENALTIES
    for penalty in penalties:
        spec, lay = _cell_qp(problem, k, weights, (), ec, penalty)
        res = solve(spec, opts)
        if res.status is Status.INFEASIBLE:
            raise ResolutionInfeasible(k)
        if res.ok:
            break
    else:
        raise NumericalLimitError(f"k={k + 1}: resolution QP stopped at {res.status.value}")
    # Entries whose bound multiplier exceeds their value sit on the bound at
    # the optimum; the interior point only approaches it.  Fix them at zero
    # and re-solve on the surviving support.
    c = res.x[lay.c]
    bound_mult = res.z[-lay.n :]
    pruned = [i for i in range(lay.n) if i != k and (c[i] <= SUPPORT_CUTOFF or c[i] < bound_mult[i])]
    if pruned and np.any(c[pruned] > 0):
        spec2, _ = _cell_qp(problem, k, weights, pruned, ec, penalty)
        res2 = solve(spec2, opts)
        if res2.ok and res2.objective <= res.objective + DEFAULT_TOL * (1 + abs(res.objective)):
            res = res2
    return res, lay


def _weighted_norm(c, k, weights):
    return float(np.linalg.norm(np.asarray(weights(c.size, k), dtype=float) * c))


def _assemble(problem, k, res, lay, ec, weights):
    b, d = problem.system.b, problem.prior.d
    x = res.x
    c = np.where(x[lay.c] > 0, x[lay.c], 0.0)
    ys, zs = lay.part("plus")
    y_plus = x[ys]
    z_plus = x[zs] if not ec else np.zeros(problem.prior.p)
    if ec:
        y_minus, z_minus = y_plus, np.zeros(problem.prior.p)
    else:
        ym, zm = lay.part("minus")
        y_minus, z_minus = x[ym], x[zm]
    ub = float(b @ y_plus + d @ z_plus)
    lb = float(b @ y_minus + d @ z_minus)
    cert = UniquenessCertificate(k, y_plus, z_plus, y_minus, z_minus, ub, lb)
    return ResolutionCell(k, c, cert, _weighted_norm(c, k, weights), resolution_metric(c, k), ub)


def _check_index(problem, k):
    if problem.lift is not None:
        raise ValueError("resolution cells are defined on unlifted problems")
    if not 0 <= k < problem.n:
        raise IndexError(f"element index {k} out of range for n={problem.n}")


def resolution_ec(system: LinearSystem, k: int, weights=DistanceWeights(), opts: SolverOptions | None = None):
    """Cell using the equations alone: ``c = A'y``."""
    problem = MixedProblem(system, PriorConstraint.none(system.n))
    require_valid(problem)
    _check_index(problem, k)
    res, lay = _solve_cell(problem, k, weights, opts, ec=True)
    return _assemble(problem, k, res, lay, True, weights)


def resolution_mixed(problem: MixedProblem, k: int, weights=DistanceWeights(), opts: SolverOptions | None = None):
    """Cell whose value is certified from both sides by the equations and the prior.

    A uniquely determined element is its own cell (``c = e_k``, objective
    zero), certified by the duals of its bound LPs; only the remaining
    elements need the QP.
    """
    require_valid(problem)
    _check_index(problem, k)
    ec = problem.prior.p == 0
    if not ec:
        bounds, cert = analyze_element(problem, k, opts=opts)
        if bounds.unique and cert is not None:
            c = np.zeros(problem.n)
            c[k] = 1.0
            return ResolutionCell(k, c, cert, 0.0, 1.0, cert.ub)
    res, lay = _solve_cell(problem, k, weights, opts, ec=ec)
    return _assemble(problem, k, res, lay, ec, weights)


def resolution_cell(problem: MixedProblem, k: int, weights=DistanceWeights(), opts: SolverOptions | None = None):
    """Dispatch to the equations-only cell when there is no prior."""
    if problem.prior.p == 0:
        return resolution_ec(problem.system, k, weights, opts)
    return resolution_mixed(problem, k, weights, opts)


def verify_cell(problem: MixedProblem, cell: ResolutionCell, tol: float = DEFAULT_TOL) -> list[str]:
    """Recheck a cell's invariants from its vectors; returns the failures."""
    A, b = problem.system.A, problem.system.b
    D, d = problem.prior.D, problem.prior.d
    cert = cell.certificate
    c = np.asarray(cell.c, dtype=float)
    out = []
    checks = {
        "c nonnegative": float(np.max(-c, initial=0.0)),
        "c pinned": abs(c[cell.k] - 1.0),
        "upper half": float(np.max(np.abs(A.T @ cert.y_plus + D.T @ cert.z_plus - c), initial=0.0)),
        "lower half": float(np.max(np.abs(A.T @ cert.y_minus + D.T @ cert.z_minus - c), initial=0.0)),
        "z_plus sign": float(np.max(cert.z_plus, initial=0.0)),
        "z_minus sign": float(np.max(-cert.z_minus, initial=0.0)),
        "zero spread": abs(b @ (cert.y_plus - cert.y_minus) + d @ (cert.z_plus - cert.z_minus)) / (1 + abs(cert.ub)),
        "lowres value": abs(b @ cert.y_plus + d @ cert.z_plus - cell.lowres_value) / (1 + abs(cell.lowres_value)),
        "samples floor": max(0.0, 1.0 - cell.resolution_samples),
    }
    for name, val in checks.items():
        if not val <= tol:
            out.append(f"{name}: residual {val:.3e} exceeds {tol:.1e}")
    return out


def lowres_map(problem: MixedProblem, cells) -> np.ndarray:
    """Low-resolution values placed at their element index; NaN where no cell was computed."""
    out = np.full(problem.n, np.nan)
    for cell in cells:
        out[cell.k] = cell.lowres_value
    return out


def resolution_map(
    problem: MixedProblem,
    weights=DistanceWeights(),
    strategy: str = "full",
    opts: SolverOptions | None = None,
    jobs: int | None = 1,
):
    """Cells for every element, or a stride-adaptive subset.

    The adaptive walk starts at the first element and advances by the
    rounded resolution of the cell just computed, so it is sequential.
    """
    require_valid(problem)
    n = problem.n
    if strategy == "full":
        return _map(lambda k: resolution_cell(problem, k, weights, opts), list(range(n)), jobs)
    if strategy not in ("stride", "stride-adaptive"):
        raise ValueError(f"unknown strategy {strategy!r}; expected 'full' or 'stride'")
    cells, k = [], 0
    while k < n:
        cell = resolution_cell(problem, k, weights, opts)
        cells.append(cell)
        k += max(1, int(round(cell.resolution_samples)))
    return cells
