"""Element bounds over a polyhedron, uniqueness decisions and dual certificates.

For the feasible set ``{x : A x = b, D x >= d}`` and a functional ``w``, the
range of ``w'x`` comes from two LPs.  Their duals give certificates: any
``(y, z)`` with ``A'y + D'z = w`` bounds ``w'x`` from above by ``b'y + d'z``
when ``z <= 0`` and from below when ``z >= 0``.  Both halves attaining the
same value prove ``w'x`` is constant on the set.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    InfeasibleError,
    MixedProblem,
    NumericalLimitError,
    SolverOptions,
    SolverResult,
    Status,
    UnboundedError,
    WORKING_OPTIONS,
    require_valid,
)
from .solver import QpSpec, solve

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class ElementBounds:
    """Range of one element over the feasible set; ``k`` is 0-based."""

    k: int
    lower: float
    upper: float
    gap: float
    unique: bool
    tol: float


@dataclass(frozen=True)
class UniquenessCertificate:
    k: int
    y_plus: np.ndarray
    z_plus: np.ndarray
    y_minus: np.ndarray
    z_minus: np.ndarray
    ub: float
    lb: float

    @property
    def spread(self) -> float:
        return self.ub - self.lb


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of :func:`verify_certificate`.

    ``sound`` says the two halves are valid bounds on the element;
    ``unique`` additionally says they coincide.  ``ok`` is whichever of the
    two was asked for.
    """

    ok: bool
    sound: bool
    unique: bool
    residuals: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


def is_unique(gap: float, upper: float, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.isfinite(gap) and gap <= tol * (1 + abs(upper)))


def _range_lps(problem: MixedProblem, w, opts):
    """Solve ``min w'x`` and ``min -w'x``; returns the two raw results."""
    A, b = problem.system.A, problem.system.b
    D, d = problem.prior.D, problem.prior.d
    w = np.asarray(w, dtype=float)
    opts = opts or WORKING_OPTIONS
    low = solve(QpSpec.lp(w, A, b, D, d), opts)
    high = solve(QpSpec.lp(-w, A, b, D, d), opts)
    return low, high


# tolerance multipliers for re-solves; too strict a target can stall the backend
_ESCALATION = (0.3, 0.1)


def _element_lps(problem: MixedProblem, k: int, opts):
    """Range LPs of element ``k``, re-solved more strictly if their certificate fails its own check."""
    w = problem.element_functional(k)
    opts = opts or WORKING_OPTIONS
    low, high = _range_lps(problem, w, opts)
    if not (low.ok and high.ok):
        return low, high
    cert = _certificate_from(problem, k, low, high)
    if verify_certificate(problem, k, cert, opts.feas_tol, require_unique=False).sound:
        return low, high
    for factor in _ESCALATION:
        strict = replace(opts, feas_tol=opts.feas_tol * factor, gap_tol=opts.gap_tol * factor)
        low2, high2 = _range_lps(problem, w, strict)
        if low2.ok and high2.ok:
            cert = _certificate_from(problem, k, low2, high2)
            if verify_certificate(problem, k, cert, opts.feas_tol, require_unique=False).sound:
                return low2, high2
    return low, high


def _side_value(res: SolverResult, sign: float, what: str) -> float:
    if res.status is Status.OPTIMAL:
        return sign * res.objective
    if res.status is Status.UNBOUNDED:
        return -sign * math.inf
    if res.status is Status.INFEASIBLE:
        raise InfeasibleError("feasible set is empty")
    raise NumericalLimitError(
        f"{what} LP stopped at NumericalLimit "
        f"(primal {res.primal_residual:.1e}, dual {res.dual_residual:.1e}, gap {res.gap:.1e})"
    )


def functional_bounds(problem: MixedProblem, w, opts: SolverOptions | None = None) -> tuple[float, float]:
    """``(min w'x, max w'x)`` over the feasible set; unbounded sides are infinite."""
    require_valid(problem)
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        _, high = _range_lps(problem, w, opts)
        _side_value(high, -1.0, "feasibility")
        return 0.0, 0.0
    low, high = _range_lps(problem, w, opts)
    return _side_value(low, 1.0, "lower bound"), _side_value(high, -1.0, "upper bound")


def _bounds_from(k, low, high, tol):
    lower = _side_value(low, 1.0, f"k={k + 1} lower bound")
    upper = _side_value(high, -1.0, f"k={k + 1} upper bound")
    gap = upper - lower
    return ElementBounds(k, lower, upper, gap, is_unique(gap, upper, tol), tol)


def _certificate_from(problem, k, low, high):
    if not (low.ok and high.ok):
        raise NumericalLimitError(f"k={k + 1}: both bound LPs must be optimal to build a certificate")
    b, d = problem.system.b, problem.prior.d
    # the max side was solved as min of the negation, so its multipliers flip
    y_plus, z_plus = -high.y, -high.z
    y_minus, z_minus = low.y, low.z
    return UniquenessCertificate(
        k,
        y_plus,
        z_plus,
        y_minus,
        z_minus,
        float(b @ y_plus + d @ z_plus),
        float(b @ y_minus + d @ z_minus),
    )


def element_gap(
    problem: MixedProblem, k: int, tol: float = DEFAULT_TOL, opts: SolverOptions | None = None
) -> ElementBounds:
    """Bounds and gap of original element ``k`` (the lifted difference when the problem is lifted)."""
    require_valid(problem)
    low, high = _element_lps(problem, k, opts)
    return _bounds_from(k, low, high, tol)


def analyze_element(problem: MixedProblem, k: int, tol: float = DEFAULT_TOL, opts: SolverOptions | None = None):
    """Bounds and certificate for element ``k`` from a single pair of LP solves.

    The certificate is ``None`` when a side is unbounded.
    """
    require_valid(problem)
    low, high = _element_lps(problem, k, opts)
    bounds = _bounds_from(k, low, high, tol)
    cert = _certificate_from(problem, k, low, high) if math.isfinite(bounds.gap) else None
    return bounds, cert


def _map(fn, ks, jobs):
    if jobs is None or jobs <= 1 or len(ks) <= 1:
        return [fn(k) for k in ks]
    # the native solver releases the GIL, so threads give real parallelism
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, ks))


def uniqueness_map(
    problem: MixedProblem,
    tol: float = DEFAULT_TOL,
    opts: SolverOptions | None = None,
    jobs: int | None = 1,
    ks=None,
    with_certificates: bool = False,
):
    """Element bounds for every ``k`` (or the given ``ks``), in index order.

    With ``with_certificates`` each entry is a ``(bounds, certificate)`` pair.
    A solver failure aborts the whole map and names the element.
    """
    require_valid(problem)
    ks = list(range(problem.n_original)) if ks is None else list(ks)

    def one(k):
        try:
            out = analyze_element(problem, k, tol, opts)
        except NumericalLimitError as exc:
            msg = str(exc)
            raise NumericalLimitError(msg if msg.startswith("k=") else f"k={k + 1}: {msg}") from exc
        return out if with_certificates else out[0]

    return _map(one, ks, jobs)


def extract_certificate(problem: MixedProblem, k: int, opts: SolverOptions | None = None) -> UniquenessCertificate:
    require_valid(problem)
    low, high = _element_lps(problem, k, opts)
    if low.status is Status.UNBOUNDED or high.status is Status.UNBOUNDED:
        raise UnboundedError(f"k={k + 1}: an unbounded side has no finite certificate")
    _bounds_from(k, low, high, DEFAULT_TOL)  # raises on infeasible or failed solves
    return _certificate_from(problem, k, low, high)


def _inf_norm(v):
    return float(np.max(np.abs(v), initial=0.0))


def verify_certificate(
    problem: MixedProblem,
    k: int,
    cert: UniquenessCertificate,
    tol: float = DEFAULT_TOL,
    require_unique: bool = True,
) -> CertificateReport:
    """Independently recheck a certificate from its vectors alone.

    Soundness means both halves reproduce the element functional, the
    multipliers carry the right signs and ``ub``/``lb`` are the stated dual
    objectives.  Uniqueness additionally needs ``ub - lb <= tol`` scaled by
    ``1 + |ub|``.
    """
    A, b = problem.system.A, problem.system.b
    D, d = problem.prior.D, problem.prior.d
    failures = []
    res = {}
    try:
        w = problem.element_functional(k)
        vecs = [np.asarray(v, dtype=float).reshape(-1) for v in (cert.y_plus, cert.z_plus, cert.y_minus, cert.z_minus)]
        y_plus, z_plus, y_minus, z_minus = vecs
        if y_plus.shape != (A.shape[0],) or y_minus.shape != (A.shape[0],):
            raise ValueError(f"y vectors must have length {A.shape[0]}")
        if z_plus.shape != (D.shape[0],) or z_minus.shape != (D.shape[0],):
            raise ValueError(f"z vectors must have length {D.shape[0]}")
        if not all(np.all(np.isfinite(v)) for v in vecs) or not (math.isfinite(cert.ub) and math.isfinite(cert.lb)):
            raise ValueError("certificate has non-finite entries")
    except (IndexError, ValueError) as exc:
        return CertificateReport(False, False, False, {}, [str(exc)])

    res["stationarity_plus"] = _inf_norm(A.T @ y_plus + D.T @ z_plus - w)
    res["stationarity_minus"] = _inf_norm(A.T @ y_minus + D.T @ z_minus - w)
    res["sign_plus"] = float(np.max(z_plus, initial=0.0))
    res["sign_minus"] = float(np.max(-z_minus, initial=0.0))
    obj_scale = 1 + abs(cert.ub)
    res["ub_value"] = abs(b @ y_plus + d @ z_plus - cert.ub) / obj_scale
    res["lb_value"] = abs(b @ y_minus + d @ z_minus - cert.lb) / (1 + abs(cert.lb))
    res["order"] = max(0.0, cert.lb - cert.ub) / obj_scale
    for name, val in res.items():
        if not val <= tol:
            failures.append(f"{name} residual {val:.3e} exceeds {tol:.1e}")
    if res["sign_plus"] > tol:
        failures.append(f"z_plus[{int(np.argmax(z_plus))}] = {z_plus.max():.3e} is positive")
    if res["sign_minus"] > tol:
        failures.append(f"z_minus[{int(np.argmin(z_minus))}] = {z_minus.min():.3e} is negative")
    sound = not failures
    spread = (b @ (y_plus - y_minus) + d @ (z_plus - z_minus)) / obj_scale
    res["spread"] = float(spread)
    unique = bool(sound and spread <= tol)
    if sound and not unique and require_unique:
        failures.append(f"bounds differ by {spread * obj_scale:.3e}; element is not pinned")
    return CertificateReport(unique if require_unique else sound, sound, unique, res, failures)
