import math

import numpy as np
import pytest

from eluniq.model import InfeasibleError, LinearSystem, MixedProblem, PriorConstraint, UnboundedError
from eluniq.priors import nonneg_prior
from eluniq.uniqueness import (
    UniquenessCertificate,
    element_gap,
    extract_certificate,
    functional_bounds,
    uniqueness_map,
    verify_certificate,
)
from polytope_oracle import functional_range, random_instance


def segment():
    """x1 + x2 = 1, x >= 0."""
    return MixedProblem(LinearSystem([[1.0, 1.0]], [1.0]), nonneg_prior(2))


def test_zero_functional():
    assert functional_bounds(segment(), np.zeros(2)) == (0.0, 0.0)


def test_segment_endpoints():
    lo, hi = functional_bounds(segment(), [1.0, 0.0])
    assert lo == pytest.approx(0.0, abs=1e-8) and hi == pytest.approx(1.0, abs=1e-8)


def test_orthant_corner_is_unique():
    prob = MixedProblem(LinearSystem([[1.0, 1.0]], [0.0]), nonneg_prior(2))
    bd = element_gap(prob, 0)
    assert bd.unique and bd.gap == pytest.approx(0.0, abs=1e-8) and bd.upper == pytest.approx(0.0, abs=1e-8)


def test_infeasible_set_raises():
    prob = MixedProblem(LinearSystem([[1.0, 1.0]], [-1.0]), nonneg_prior(2))
    with pytest.raises(InfeasibleError):
        element_gap(prob, 0)


def test_unbounded_side_gives_infinite_gap():
    prob = MixedProblem(LinearSystem([[1.0, -1.0]], [0.0]), nonneg_prior(2))
    bd = element_gap(prob, 0)
    assert bd.lower == pytest.approx(0.0, abs=1e-8) and bd.upper == math.inf and not bd.unique


def test_square_invertible_system_is_all_unique(rng):
    A = rng.normal(size=(5, 5)) + 3 * np.eye(5)
    prob = MixedProblem(LinearSystem(A, rng.normal(size=5)), PriorConstraint.none(5))
    assert all(bd.unique for bd in uniqueness_map(prob))


@pytest.mark.parametrize("seed", range(12))
def test_functional_bounds_match_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    x0 = rng.random(6)
    A = rng.normal(size=(4, 6))
    prob = MixedProblem(LinearSystem(A, A @ x0), nonneg_prior(6))
    w = rng.normal(size=6)
    lo, hi = functional_range(w, A, A @ x0, np.eye(6), np.zeros(6))
    got = functional_bounds(prob, w)
    for a, b in zip(got, (lo, hi)):
        assert (math.isinf(a) and a == b) or a == pytest.approx(b, abs=1e-6 * (1 + abs(b)))


@pytest.mark.parametrize("seed", range(50))
def test_element_gap_matches_oracle(seed):
    A, b, D, d, _ = random_instance(seed)
    prob = MixedProblem(LinearSystem(A, b), PriorConstraint(D, d))
    for k in range(A.shape[1]):
        lo, hi = functional_range(np.eye(A.shape[1])[k], A, b, D, d)
        bd = element_gap(prob, k)
        if math.isinf(hi - lo):
            assert math.isinf(bd.gap)
        else:
            assert bd.gap == pytest.approx(hi - lo, abs=1e-6)


def test_segment_certificate_by_hand():
    cert = extract_certificate(segment(), 0)
    assert cert.ub == pytest.approx(1.0, abs=1e-7) and cert.lb == pytest.approx(0.0, abs=1e-7)
    assert cert.y_plus[0] == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(cert.z_plus, [0.0, -1.0], atol=1e-6)
    assert cert.y_minus[0] == pytest.approx(0.0, abs=1e-6)
    assert np.allclose(cert.z_minus, [1.0, 0.0], atol=1e-6)
    report = verify_certificate(segment(), 0, cert, require_unique=False)
    assert report.ok and report.sound and not report.unique
    assert not verify_certificate(segment(), 0, cert).ok


def test_certificate_of_unique_element_verifies():
    prob = MixedProblem(LinearSystem([[1.0, 1.0], [1.0, -1.0]], [1.0, 0.0]), nonneg_prior(2))
    cert = extract_certificate(prob, 1)
    report = verify_certificate(prob, 1, cert)
    assert report.ok and report.unique and report.failures == []


def test_equations_only_certificate():
    A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    prob = MixedProblem(LinearSystem(A, [0.3, 0.2]), PriorConstraint.none(3))
    # e_1 is not in the row space, so no finite certificate exists
    with pytest.raises(UnboundedError):
        extract_certificate(prob, 0)
    # a functional in the row space is pinned by y alone
    B = np.array([[1.0, 0.0], [0.0, 1.0]])
    prob2 = MixedProblem(LinearSystem(B, [0.3, 0.2]), PriorConstraint.none(2))
    cert = extract_certificate(prob2, 0)
    assert cert.z_plus.size == 0 and np.allclose(B.T @ cert.y_plus, [1.0, 0.0])
    same = UniquenessCertificate(0, cert.y_plus, cert.z_plus, cert.y_plus, cert.z_minus, cert.ub, cert.ub)
    report = verify_certificate(prob2, 0, same)
    assert report.ok and report.residuals["spread"] == 0.0


def test_sign_violation_names_component():
    cert = extract_certificate(segment(), 0)
    bad = UniquenessCertificate(0, cert.y_plus, cert.z_plus + np.array([0.5, 0.0]), cert.y_minus, cert.z_minus,
                                cert.ub, cert.lb)
    report = verify_certificate(segment(), 0, bad, require_unique=False)
    assert not report.ok
    assert any("z_plus[0]" in f for f in report.failures)


def test_perturbed_certificates_fail(rng):
    prob = MixedProblem(LinearSystem([[1.0, 1.0], [1.0, -1.0]], [1.0, 0.0]), nonneg_prior(2))
    cert = extract_certificate(prob, 0)
    fields = ("y_plus", "y_minus")
    for i in range(20):
        name = fields[i % 2]
        vec = getattr(cert, name).copy()
        vec[rng.integers(vec.size)] += 1e-3 * rng.choice([-1, 1])
        tampered = UniquenessCertificate(**{**cert.__dict__, name: vec})
        assert not verify_certificate(prob, 0, tampered, require_unique=False).ok


def test_malformed_certificate_is_rejected():
    cert = extract_certificate(segment(), 0)
    short = UniquenessCertificate(0, cert.y_plus, cert.z_plus[:1], cert.y_minus, cert.z_minus, cert.ub, cert.lb)
    report = verify_certificate(segment(), 0, short)
    assert not report.ok and "length" in report.failures[0]


def test_map_parallel_matches_serial():
    A, b, D, d, _ = random_instance(7)
    prob = MixedProblem(LinearSystem(A, b), PriorConstraint(D, d))
    assert uniqueness_map(prob, jobs=1) == uniqueness_map(prob, jobs=3)
