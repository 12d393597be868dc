"""Reading and writing problems, reports and certificates.

Matrices are headerless comma-separated text, one row per line; vectors
hold one value per line.  A problem manifest is a JSON object naming the
``A`` and ``b`` files and describing the prior.  Relative paths inside a
manifest are resolved against the manifest's own directory.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import priors
from .model import LinearSystem, MixedProblem, PriorConstraint
from .uniqueness import UniquenessCertificate

PRIOR_TYPES = ("none", "nonneg", "box", "bp", "denoise_nn")


class ManifestError(ValueError):
    pass


def _fmt(v: float, digits: int) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{digits}g}"


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text()
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        return np.zeros((0, 0))
    try:
        data = [[float(tok) for tok in line.split(",")] for line in rows]
    except ValueError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise ManifestError(f"{path}: rows have differing lengths {sorted(widths)}")
    return np.array(data)


def read_vector(path) -> np.ndarray:
    text = Path(path).read_text()
    try:
        return np.array([float(line) for line in text.splitlines() if line.strip()])
    except ValueError as exc:
        raise ManifestError(f"{path}: {exc}") from None


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = (",".join(_fmt(v, 17) for v in row) for row in M)
    Path(path).write_text("".join(line + "\n" for line in lines))


def write_vector(path, v) -> None:
    Path(path).write_text("".join(_fmt(x, 17) + "\n" for x in np.asarray(v, dtype=float).ravel()))


def _scalar_or_file(value, base: Path, n: int, name: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(n, float(value))
    if isinstance(value, str):
        vec = read_vector(base / value)
        if vec.shape[0] != n:
            raise ManifestError(f"{name} has {vec.shape[0]} entries, expected {n}")
        return vec
    raise ManifestError(f"{name} must be a number or a vector file path")


def load_manifest(path) -> dict:
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(spec, dict) or "A" not in spec or "b" not in spec:
        raise ManifestError(f"{path}: manifest needs 'A' and 'b' entries")
    prior = spec.get("prior", {"type": "none"})
    if not isinstance(prior, dict) or prior.get("type") not in PRIOR_TYPES:
        raise ManifestError(f"{path}: prior type must be one of {', '.join(PRIOR_TYPES)}")
    return spec


def load_system(manifest_path) -> tuple[LinearSystem, dict, Path]:
    """The equations named by a manifest, plus its prior entry and directory."""
    manifest_path = Path(manifest_path)
    spec = load_manifest(manifest_path)
    base = manifest_path.parent
    A = read_matrix(base / spec["A"])
    b = read_vector(base / spec["b"])
    if A.shape[0] != b.shape[0]:
        raise ManifestError(f"b length mismatch: {b.shape[0]} != A rows {A.shape[0]}")
    return LinearSystem(A, b), spec.get("prior", {"type": "none"}), base


def build_problem(system: LinearSystem, prior: dict, base: Path = Path(".")) -> MixedProblem:
    kind = prior["type"]
    n = system.n
    if kind == "none":
        return MixedProblem(system, PriorConstraint.none(n))
    if kind == "nonneg":
        return MixedProblem(system, priors.nonneg_prior(n))
    if kind == "box":
        if "dmin" not in prior or "dmax" not in prior:
            raise ManifestError("box prior needs 'dmin' and 'dmax'")
        box = priors.BoxSpec(
            _scalar_or_file(prior["dmin"], base, n, "dmin"),
            _scalar_or_file(prior["dmax"], base, n, "dmax"),
        )
        return MixedProblem(system, priors.box_prior(box))
    if kind == "bp":
        return priors.bp_lift(system, priors.bp_alpha(system)).problem
    sigma = prior.get("sigma", "auto")
    if sigma == "auto":
        sigma = priors.nn_sigma(system)
    elif not isinstance(sigma, (int, float)) or isinstance(sigma, bool) or sigma < 0:
        raise ManifestError("sigma must be 'auto' or a non-negative number")
    return priors.denoise_nn_problem(system, float(sigma))


def load_problem(manifest_path) -> MixedProblem:
    system, prior, base = load_system(manifest_path)
    return build_problem(system, prior, base)


def box_from_prior(prior: dict, n: int, base: Path = Path(".")) -> priors.BoxSpec:
    return priors.BoxSpec(
        _scalar_or_file(prior["dmin"], base, n, "dmin"),
        _scalar_or_file(prior["dmax"], base, n, "dmax"),
    )


def write_manifest(path, prior: dict, a_name="A.csv", b_name="b.csv", extra=None) -> None:
    body = {"A": a_name, "b": b_name, "prior": prior}
    body.update(extra or {})
    Path(path).write_text(json.dumps(body, indent=2) + "\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def write_uniqueness_csv(path, bounds) -> None:
    _write_rows(
        path,
        ["k", "lower", "upper", "gap", "unique"],
        (
            [bd.k + 1, _fmt(bd.lower, 12), _fmt(bd.upper, 12), _fmt(bd.gap, 12), "true" if bd.unique else "false"]
            for bd in bounds
        ),
    )


def write_resolution_csv(path, cells, n: int | None = None) -> None:
    """One row per cell; with ``n`` given, one row per element and NaN where no cell exists."""
    nan = math.nan
    if n is None:
        ordered = [(c.k, c) for c in cells]
    else:
        by_k = {c.k: c for c in cells}
        ordered = [(k, by_k.get(k)) for k in range(n)]
    _write_rows(
        path,
        ["k", "objective", "resolution_samples", "lowres_value"],
        (
            [k + 1]
            + [_fmt(v, 12) for v in ((c.objective, c.resolution_samples, c.lowres_value) if c else (nan, nan, nan))]
            for k, c in ordered
        ),
    )


def write_estimate_csv(path, x_true, estimate) -> None:
    n = len(estimate)
    x_true = np.full(n, np.nan) if x_true is None else np.asarray(x_true, dtype=float)
    _write_rows(
        path,
        ["k", "x_true", "estimate"],
        ([k + 1, _fmt(x_true[k], 12), _fmt(estimate[k], 12)] for k in range(n)),
    )


def read_csv_columns(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    out = {}
    for key in rows[0]:
        vals = [r[key] for r in rows]
        if all(v in ("true", "false") for v in vals):
            out[key] = np.array([v == "true" for v in vals])
        else:
            out[key] = np.array([float(v) for v in vals])
    return out


def certificate_to_dict(cert: UniquenessCertificate, verified: bool, unique: bool | None = None) -> dict:
    # repr-based JSON floats round-trip exactly (at most 17 significant digits)
    body = {
        "k": cert.k + 1,
        "y_plus": [float(v) for v in cert.y_plus],
        "z_plus": [float(v) for v in cert.z_plus],
        "y_minus": [float(v) for v in cert.y_minus],
        "z_minus": [float(v) for v in cert.z_minus],
        "ub": float(cert.ub),
        "lb": float(cert.lb),
        "verified": bool(verified),
    }
    if unique is not None:
        body["unique"] = bool(unique)
    return body


def certificate_from_dict(body: dict) -> UniquenessCertificate:
    try:
        return UniquenessCertificate(
            int(body["k"]) - 1,
            np.array(body["y_plus"], dtype=float),
            np.array(body["z_plus"], dtype=float),
            np.array(body["y_minus"], dtype=float),
            np.array(body["z_minus"], dtype=float),
            float(body["ub"]),
            float(body["lb"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed certificate: {exc}") from None


def write_certificate(path, cert: UniquenessCertificate, verified: bool, unique: bool | None = None) -> None:
    Path(path).write_text(json.dumps(certificate_to_dict(cert, verified, unique), indent=1) + "\n")


def read_certificate(path) -> UniquenessCertificate:
    try:
        body = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    return certificate_from_dict(body)
