"""The 1-D super-resolution test problem: Gaussian blur followed by 2x decimation."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import LinearSystem, MixedProblem, NumericalLimitError, PriorConstraint
from . import priors

log = logging.getLogger(__name__)

BOX_LIMITS = (0.0, 0.3)
PRIOR_KINDS = ("ec", "nn", "box", "bp", "denoise_nn")

_BUMP = (0.05, 0.1236, 0.1844, 0.2324, 0.2676, 0.29, 0.2996, 0.2964, 0.2804, 0.2516, 0.21, 0.1556, 0.0884)


@dataclass(frozen=True)
class SimulationSpec:
    n: int = 100
    factor: int = 2
    sigma: float = 3.0

    def __post_init__(self):
        if self.n < 1 or self.factor < 1 or self.n % self.factor:
            raise ValueError(f"n={self.n} must be a positive multiple of factor={self.factor}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def m(self) -> int:
        return self.n // self.factor


def gaussian_kernel(sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Offsets ``t`` with ``|t| <= 6 sigma`` and unit-sum Gaussian taps."""
    half = int(np.floor(6 * sigma))
    t = np.arange(-half, half + 1)
    g = np.exp(-(t**2) / (2 * sigma**2))
    return t, g / g.sum()


def gaussian_downsample_operator(spec: SimulationSpec = SimulationSpec()) -> np.ndarray:
    """Blur-and-decimate matrix; output row ``j`` (1-based) is centred on input ``factor*j``.

    Taps falling outside the signal are dropped without renormalising,
    so the edge rows sum to less than one.
    """
    t, g = gaussian_kernel(spec.sigma)
    half = t[-1]
    A = np.zeros((spec.m, spec.n))
    for j in range(spec.m):
        centre = spec.factor * (j + 1) - 1  # 0-based input index
        lo, hi = max(0, centre - half), min(spec.n - 1, centre + half)
        A[j, lo : hi + 1] = g[lo - centre + half : hi - centre + half + 1]
    return A


def paper_signal() -> np.ndarray:
    """Spikes, two short plateaus, a long plateau and a smooth bump on 100 samples."""
    x = np.zeros(100)
    x[12] = 0.3
    x[16] = 0.2
    x[29:32] = 0.3
    x[34:37] = 0.3
    x[49:66] = 0.3
    x[74:87] = _BUMP
    return x


def signal_for(n: int) -> np.ndarray:
    """The reference signal, nearest-sample resampled to length ``n``."""
    ref = paper_signal()
    if n == ref.size:
        return ref
    return ref[(np.arange(n) * ref.size) // n]


def paper_system(spec: SimulationSpec = SimulationSpec()) -> tuple[LinearSystem, np.ndarray]:
    A = gaussian_downsample_operator(spec)
    x_true = paper_signal()
    if spec.n != x_true.size:
        raise ValueError("the reference signal is defined for n=100 only")
    return LinearSystem(A, A @ x_true), x_true


def simulated_system(spec: SimulationSpec = SimulationSpec()) -> tuple[LinearSystem, np.ndarray]:
    """Like :func:`paper_system` but for any length, using :func:`signal_for`."""
    A = gaussian_downsample_operator(spec)
    x_true = signal_for(spec.n)
    return LinearSystem(A, A @ x_true), x_true


def make_problem(system: LinearSystem, prior_kind: str, box=BOX_LIMITS) -> MixedProblem:
    n = system.n
    if prior_kind == "ec":
        return MixedProblem(system, PriorConstraint.none(n))
    if prior_kind == "nn":
        return MixedProblem(system, priors.nonneg_prior(n))
    if prior_kind == "box":
        lo, hi = box
        spec = priors.BoxSpec(np.full(n, lo), np.full(n, hi))
        return MixedProblem(system, priors.box_prior(spec))
    if prior_kind == "bp":
        return priors.bp_lift(system, priors.bp_alpha(system)).problem
    if prior_kind == "denoise_nn":
        return priors.denoise_nn_problem(system, priors.nn_sigma(system))
    raise ValueError(f"unknown prior kind {prior_kind!r}; expected one of {PRIOR_KINDS}")


def make_paper_problem(prior_kind: str) -> tuple[MixedProblem, np.ndarray]:
    system, x_true = paper_system()
    return make_problem(system, prior_kind), x_true


FIGURE_KINDS = ("ec", "nn", "box")


def _tolerant_cells(problem: MixedProblem, jobs: int) -> list:
    """Full resolution map that records solver failures instead of aborting."""
    from .resolution import resolution_cell
    from .uniqueness import _map

    def one(k):
        try:
            return resolution_cell(problem, k)
        except NumericalLimitError as exc:
            log.warning("resolution cell k=%d skipped: %s", k + 1, exc)
            return None

    return [c for c in _map(one, list(range(problem.n)), jobs) if c is not None]


def run_figures(outdir, jobs: int = 1) -> list[Path]:
    """Regenerate the reconstruction, resolution and low-resolution figures.

    Writes ``fig3_{l1,nnls,boxls}.csv``, ``fig4_{ec,nn,box}.csv``,
    ``fig5_{ec,nn,box}.csv`` and ``fig2.svg`` .. ``fig5.svg`` into
    ``outdir`` and returns the paths written.  Elements whose resolution
    QP fails are written as NaN rows.
    """
    from . import estimators, io
    from .plotting import plot_traces

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    system, x_true = paper_system()
    written: list[Path] = []

    def emit(name):
        written.append(out / name)
        return out / name

    factor = system.n // system.m
    data_at = np.arange(1, system.m + 1) * factor  # output j sits on input factor*j
    plot_traces(emit("fig2.svg"), {"x_true": x_true, "b": (data_at, system.b)}, "amplitude", "test signal and blurred data")

    box = priors.BoxSpec(np.full(system.n, BOX_LIMITS[0]), np.full(system.n, BOX_LIMITS[1]))
    estimates = {
        "l1": estimators.basis_pursuit(system),
        "nnls": estimators.nnls_estimate(system),
        "boxls": estimators.box_minnorm_estimate(system, box),
    }
    for name, est in estimates.items():
        io.write_estimate_csv(emit(f"fig3_{name}.csv"), x_true, est)
    plot_traces(emit("fig3.svg"), {"x_true": x_true, **{k.upper(): v for k, v in estimates.items()}},
                "amplitude", "reconstructions")

    # parallel over prior kinds; each map runs serially inside its worker
    with ThreadPoolExecutor(max_workers=max(1, min(jobs, len(FIGURE_KINDS)))) as pool:
        maps = dict(zip(FIGURE_KINDS, pool.map(lambda kind: _tolerant_cells(make_problem(system, kind), 1), FIGURE_KINDS)))

    samples, lowres = {}, {}
    for kind, cells in maps.items():
        io.write_resolution_csv(emit(f"fig4_{kind}.csv"), cells, n=system.n)
        samples[kind.upper()] = _by_index(cells, system.n, "resolution_samples")
        lowres[kind.upper()] = _by_index(cells, system.n, "lowres_value")
        io.write_estimate_csv(emit(f"fig5_{kind}.csv"), x_true, lowres[kind.upper()])
    plot_traces(emit("fig4.svg"), samples, "resolution (samples)", "resolution per element")
    plot_traces(emit("fig5.svg"), {"x_true": x_true, **lowres}, "amplitude", "low-resolution estimates")
    return written


def _by_index(cells, n, attr) -> np.ndarray:
    vals = np.full(n, np.nan)
    for c in cells:
        vals[c.k] = getattr(c, attr)
    return vals

