import numpy as np
import pytest
import scipy.linalg

from hyperdisp.expm import expm_batch, squaring_counts


def test_matches_scipy_on_random_batch():
    rng = np.random.default_rng(0)
    A = (rng.normal(size=(40, 4, 4)) + 1j * rng.normal(size=(40, 4, 4))) * rng.uniform(0.01, 20, size=(40, 1, 1))
    X = expm_batch(A)
    for i in range(40):
        ref = scipy.linalg.expm(A[i])
        assert np.linalg.norm(X[i] - ref) <= 1e-11 * max(1.0, np.linalg.norm(ref))


def test_zero_and_jordan_block():
    np.testing.assert_allclose(expm_batch(np.zeros((3, 2, 2))), np.broadcast_to(np.eye(2), (3, 2, 2)), atol=1e-15)
    t = 7.0
    J = np.array([[0.0, t], [0.0, 0.0]])
    np.testing.assert_allclose(expm_batch(J), [[1, t], [0, 1]], atol=1e-13)


def test_per_matrix_squaring():
    A = np.stack([np.eye(2) * 1e-3, np.eye(2) * 1e3])
    s = squaring_counts(A)
    assert s[0] == 0 and s[1] > 5
    X = expm_batch(1j * A)
    np.testing.assert_allclose(X[0], np.eye(2) * np.exp(1e-3j), rtol=1e-14)
    np.testing.assert_allclose(X[1], np.eye(2) * np.exp(1e3j), rtol=1e-11)


def test_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        expm_batch(np.array([[np.nan]]))
