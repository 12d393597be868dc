import numpy as np
import pytest

from eluniq.estimators import basis_pursuit, box_minnorm_estimate, nnls_estimate
from eluniq.model import InfeasibleError, LinearSystem
from eluniq.priors import BoxSpec


def test_basis_pursuit_identity():
    b = np.array([0.2, -0.1, 0.4])
    assert np.allclose(basis_pursuit(LinearSystem(np.eye(3), b)), b, atol=1e-7)


def test_basis_pursuit_picks_sparser_vertex():
    # candidates (2, 0) with norm 2 and (0, 1) with norm 1
    assert np.allclose(basis_pursuit(LinearSystem([[1.0, 2.0]], [2.0])), [0.0, 1.0], atol=1e-7)


def test_nnls_zero_data():
    assert np.array_equal(nnls_estimate(LinearSystem(np.ones((2, 3)), np.zeros(2))), np.zeros(3))


def test_nnls_recovers_sparse_nonnegative_signal(rng):
    A = rng.random((8, 12))
    x0 = np.zeros(12)
    x0[[2, 7]] = [0.4, 0.9]
    assert np.allclose(nnls_estimate(LinearSystem(A, A @ x0)), x0, atol=1e-8)


def test_box_estimate_degenerate_box():
    A = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    x0 = np.array([0.1, 0.2, 0.05])
    assert np.allclose(box_minnorm_estimate(LinearSystem(A, A @ x0), BoxSpec(x0, x0)), x0, atol=1e-7)


def test_box_estimate_interior_minimum():
    b = np.array([0.3, -0.2])
    est = box_minnorm_estimate(LinearSystem(np.eye(2), b), BoxSpec.uniform(2, -10, 10))
    assert np.allclose(est, b, atol=1e-7)


def test_box_estimate_is_min_norm_point(rng):
    A = rng.normal(size=(2, 5))
    b = A @ rng.random(5)
    est = box_minnorm_estimate(LinearSystem(A, b), BoxSpec.uniform(5, -10, 10))
    assert np.allclose(est, np.linalg.pinv(A) @ b, atol=1e-6)


def test_box_estimate_infeasible():
    with pytest.raises(InfeasibleError):
        box_minnorm_estimate(LinearSystem([[1.0, 1.0]], [5.0]), BoxSpec.uniform(2, 0.0, 1.0))
