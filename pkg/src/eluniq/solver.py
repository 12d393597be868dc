"""Convex QP/LP solves with explicit duals, plus active-set NNLS.

The QP form is::

    minimize    1/2 x'Qx + q'x
    subject to  Aeq x = beq
                G x >= h

with KKT conditions ``Q x + q = Aeq' y + G' z``, ``z >= 0``,
``z * (G x - h) = 0``.  LPs are the special case ``Q = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import clarabel
import scipy.sparse as sp

from .model import NumericalLimitError, SolverOptions, SolverResult, Status

log = logging.getLogger(__name__)



@dataclass(frozen=True)
class QpSpec:
    Q: np.ndarray
    q: np.ndarray
    Aeq: np.ndarray
    beq: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        n = q.shape[0]
        Q = np.zeros((n, n)) if self.Q is None else np.asarray(self.Q, dtype=float)
        Aeq = np.zeros((0, n)) if self.Aeq is None else np.asarray(self.Aeq, dtype=float).reshape(-1, n)
        G = np.zeros((0, n)) if self.G is None else np.asarray(self.G, dtype=float).reshape(-1, n)
        for name, val in (("Q", Q), ("q", q), ("Aeq", Aeq), ("G", G)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        beq = np.zeros(0) if self.beq is None else np.asarray(self.beq, dtype=float).reshape(-1)
        h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).reshape(-1)
        beq.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "beq", beq)
        object.__setattr__(self, "h", h)
        if Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
            raise ValueError("Q must be symmetric")
        if beq.shape[0] != Aeq.shape[0]:
            raise ValueError("beq length does not match Aeq rows")
        if h.shape[0] != G.shape[0]:
            raise ValueError("h length does not match G rows")

    @classmethod
    def lp(cls, c, Aeq=None, beq=None, G=None, h=None) -> "QpSpec":
        return cls(None, c, Aeq, beq, G, h)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def is_lp(self) -> bool:
        return not np.any(self.Q)


def kkt_residuals(spec: QpSpec, x, y, z):
    """Scaled primal, dual, complementarity and gap measures at a point."""
    Qx = spec.Q @ x
    rp = spec.Aeq @ x - spec.beq
    slack = spec.G @ x - spec.h
    pinf = max(
        np.max(np.abs(rp), initial=0.0) / (1 + np.max(np.abs(spec.beq), initial=0.0)),
        np.max(-slack, initial=0.0) / (1 + np.max(np.abs(spec.h), initial=0.0)),
    )
    rd = Qx + spec.q - spec.Aeq.T @ y - spec.G.T @ z
    dinf = max(
        np.max(np.abs(rd), initial=0.0) / (1 + np.max(np.abs(spec.q), initial=0.0)),
        np.max(-z, initial=0.0),
    )
    pobj = 0.5 * x @ Qx + spec.q @ x
    dobj = -0.5 * x @ Qx + spec.beq @ y + spec.h @ z
    comp = np.max(np.abs(z * slack), initial=0.0) / ((1 + abs(pobj)) * (1 + np.max(np.abs(z), initial=0.0)))
    gap = abs(pobj - dobj) / (1 + abs(pobj))
    return pinf, dinf, comp, gap, pobj


_STATUS = {
    "Solved": Status.OPTIMAL,
    "AlmostSolved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "DualInfeasible": Status.UNBOUNDED,
    "AlmostDualInfeasible": Status.UNBOUNDED,
}


def _settings(opts: SolverOptions, tweak=None):
    st = clarabel.DefaultSettings()
    st.verbose = False
    st.max_iter = opts.max_iter
    # the backend aims at least as tight as its default even when the
    # acceptance test below is looser
    st.tol_feas = min(opts.feas_tol, 1e-8)
    st.tol_gap_abs = min(opts.gap_tol, 1e-8)
    st.tol_gap_rel = min(opts.gap_tol, 1e-8)
    st.static_regularization_constant = opts.regularization
    st.presolve_enable = False
    for key, val in (tweak or {}).items():
        setattr(st, key, val)
    return st


def solve(spec: QpSpec, opts: SolverOptions | None = None) -> SolverResult:
    """Solve a convex QP (or LP) and return primal and dual solutions.

    The homogeneous primal-dual interior point method of Clarabel does the
    iterations; the KKT measures reported here are recomputed from the
    returned point in this module's sign convention, and ``OPTIMAL`` is
    only reported when they meet ``opts``.
    """
    opts = opts or SolverOptions()
    n, me, mi = spec.n, spec.Aeq.shape[0], spec.G.shape[0]
    rows = _orthonormal_rows(spec.Aeq, spec.beq)
    if rows is None:
        zero = np.zeros(n)
        return SolverResult(Status.INFEASIBLE, zero, np.zeros(me), np.zeros(mi), np.inf, 0)
    Aorth, borth, back = rows
    mr = Aorth.shape[0]
    if mi == 0 and spec.is_lp:
        return _equality_lp(spec, Aorth, borth, back, opts)
    # Clarabel form: A x + s = b with s in (zero cone) x (nonnegative cone)
    M = sp.csc_matrix(np.vstack([Aorth, -spec.G]))
    rhs = np.concatenate([borth, -spec.h])
    cones = []
    if mr:
        cones.append(clarabel.ZeroConeT(mr))
    if mi:
        cones.append(clarabel.NonnegativeConeT(mi))
    P = sp.triu(sp.csc_matrix(spec.Q), format="csc")

    # A backend "almost solved" point that passes the residual test is kept
    # as a fallback while the remaining settings get a chance to converge.
    best, fallback = None, None
    for tweak in _RETRIES:
        res, converged = _clarabel_once(spec, P, M, rhs, cones, _settings(opts, tweak), mr, back, opts)
        if res.status is Status.NUMERICAL_LIMIT:
            if best is None or _score(res) < _score(best):
                best = res
        elif converged:
            return res
        elif fallback is None:
            fallback = res
    return fallback or best


# Settings tried in turn when a solve misses the acceptance test.  Tight
# tolerances with minimal regularisation come first: on ill-conditioned
# element LPs they give the most accurate bounds and need fewer iterations.
_RETRIES = (
    {
        "tol_feas": 1e-10,
        "tol_gap_abs": 1e-10,
        "tol_gap_rel": 1e-10,
        "static_regularization_constant": 1e-12,
        "iterative_refinement_reltol": 1e-15,
        "iterative_refinement_abstol": 1e-15,
        "max_iter": 400,
    },
    {},
    {"equilibrate_enable": False},
    {"static_regularization_constant": 1e-7, "max_iter": 400},
)


def _score(res: SolverResult) -> float:
    vals = (res.primal_residual, res.dual_residual, res.complementarity, res.gap)
    return max(v if np.isfinite(v) else np.inf for v in vals)


def _clarabel_once(spec, P, M, rhs, cones, settings, mr, back, opts) -> tuple[SolverResult, bool]:
    """One backend run; the flag says the backend reached its full (not reduced) accuracy."""
    n, me, mi = spec.n, spec.Aeq.shape[0], spec.G.shape[0]
    try:
        raw = clarabel.DefaultSolver(P, spec.q, M, rhs, cones, settings).solve()
    except BaseException as exc:  # the Rust layer raises PanicException, a BaseException
        if isinstance(exc, (KeyboardInterrupt, SystemExit)):
            raise
        log.debug("clarabel failed: %s", exc)
        return SolverResult(Status.NUMERICAL_LIMIT, np.zeros(n), np.zeros(me), np.zeros(mi), np.nan, 0), False

    x = np.asarray(raw.x, dtype=float)
    zc = np.asarray(raw.z, dtype=float)
    y = back @ -zc[:mr]
    z = zc[mr:]
    raw_status = str(raw.status)
    converged = not raw_status.startswith("Almost")
    status = _STATUS.get(raw_status, Status.NUMERICAL_LIMIT)
    if status is Status.UNBOUNDED:
        ray = x / max(np.max(np.abs(x)), 1e-300)
        return SolverResult(status, x, y, z, -np.inf, raw.iterations, ray=ray), converged
    if status is Status.INFEASIBLE:
        return SolverResult(status, x, y, z, np.inf, raw.iterations), converged

    pinf, dinf, comp, gap, pobj = kkt_residuals(spec, x, y, z)
    if status is Status.OPTIMAL:
        if not (pinf <= opts.feas_tol and dinf <= opts.feas_tol and comp <= opts.gap_tol and gap <= opts.gap_tol):
            log.debug("downgrading: pinf=%.2e dinf=%.2e comp=%.2e gap=%.2e", pinf, dinf, comp, gap)
            status = Status.NUMERICAL_LIMIT
    return SolverResult(status, x, y, z, float(pobj), raw.iterations, pinf, dinf, comp, gap), converged


def _equality_lp(spec, V, v, back, opts):
    """``min q'x`` over an affine set: bounded exactly when ``q`` lies in the row space."""
    q = spec.q
    yv = V @ q
    drift = q - V.T @ yv
    x = V.T @ v
    me = spec.Aeq.shape[0]
    if np.max(np.abs(drift), initial=0.0) > opts.feas_tol * (1 + np.max(np.abs(q), initial=0.0)):
        ray = -drift / np.max(np.abs(drift))
        return SolverResult(Status.UNBOUNDED, x, np.zeros(me), np.zeros(0), -np.inf, 0, ray=ray)
    y = back @ yv
    z = np.zeros(0)
    pinf, dinf, comp, gap, pobj = kkt_residuals(spec, x, y, z)
    ok = pinf <= opts.feas_tol and dinf <= opts.feas_tol and gap <= opts.gap_tol
    status = Status.OPTIMAL if ok else Status.NUMERICAL_LIMIT
    return SolverResult(status, x, y, z, float(pobj), 0, pinf, dinf, comp, gap)


def _orthonormal_rows(Aeq, beq):
    """Replace ``Aeq x = beq`` by an equivalent system with orthonormal rows.

    With ``Aeq = U S V'`` truncated to its numerical rank, the system becomes
    ``V' x = S^-1 U' beq``.  Returns ``(V', S^-1 U' beq, back)`` where
    ``back`` maps duals of the new system to duals of the original one, or
    ``None`` when ``beq`` has a component outside the range of ``Aeq``.
    """
    me, n = Aeq.shape
    if me == 0:
        return Aeq, beq, np.zeros((0, 0))
    U, svals, Vt = np.linalg.svd(Aeq, full_matrices=False)
    cutoff = max(me, n) * np.finfo(float).eps * (svals[0] if svals.size else 0.0)
    r = int(np.sum(svals > cutoff))
    U, svals, Vt = U[:, :r], svals[:r], Vt[:r]
    outside = beq - U @ (U.T @ beq)
    if np.max(np.abs(outside), initial=0.0) > 1e-9 * (1 + np.max(np.abs(beq), initial=0.0)):
        return None
    return Vt, (U.T @ beq) / svals, U / svals


def solve_nnls_activeset(A, b, max_iter=None, tol=None) -> np.ndarray:
    """Lawson-Hanson active-set solution of ``min ||A x - b||_2, x >= 0``.

    The entering index is always the one with the most negative gradient
    (largest ``A'(b - A x)``), with ties going to the lowest index, so the
    result is a deterministic basic solution.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if n < 1:
        raise ValueError("A must have at least one column")
    max_iter = 3 * n if max_iter is None else max_iter
    if tol is None:
        tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, np.max(np.abs(A), initial=0.0)) * max(
            1.0, np.max(np.abs(b), initial=0.0)
        )

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    it = 0
    while not passive.all():
        cand = np.where(passive, -np.inf, w)
        j = int(np.argmax(cand))
        if cand[j] <= tol:
            break
        passive[j] = True
        while True:
            it += 1
            if it > max_iter:
                raise NumericalLimitError(f"NNLS did not converge in {max_iter} iterations")
            idx = np.flatnonzero(passive)
            zsub, *_ = np.linalg.lstsq(A[:, idx], b, rcond=None)
            if np.all(zsub > 0):
                x = np.zeros(n)
                x[idx] = zsub
                break
            neg = zsub <= 0
            alpha = np.min(x[idx][neg] / (x[idx][neg] - zsub[neg]))
            x[idx] = x[idx] + alpha * (zsub - x[idx])
            passive &= x > tol
            x[~passive] = 0.0
            if not passive.any():
                break
        w = A.T @ (b - A @ x)
    return x
