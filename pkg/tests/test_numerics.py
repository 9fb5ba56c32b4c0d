import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import bisect

from resetfreq.numerics import (NewtonConfig, NewtonError, eigenvalues, is_hurwitz,
                                matrix_exponential, newton_solve, spectral_radius)

small = st.floats(-2, 2, allow_nan=False)


def test_expm_at_zero_is_identity():
    M = np.random.default_rng(1).normal(size=(4, 4))
    np.testing.assert_array_equal(matrix_exponential(M, 0.0), np.eye(4))


def test_expm_diagonal_and_rotation():
    np.testing.assert_allclose(matrix_exponential(np.diag([-1.0, 2.0]), 0.7),
                               np.diag(np.exp([-0.7, 1.4])), rtol=1e-14)
    w, t = 3.0, 0.4
    R = matrix_exponential(np.array([[0, -w], [w, 0]]), t)
    c, s = np.cos(w * t), np.sin(w * t)
    np.testing.assert_allclose(R, [[c, -s], [s, c]], atol=1e-15)


def test_expm_rejects_non_square():
    with pytest.raises(ValueError):
        matrix_exponential(np.ones((2, 3)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), t1=small, t2=small)
def test_expm_semigroup_and_determinant(seed, t1, t2):
    M = np.random.default_rng(seed).normal(size=(4, 4))
    E12 = matrix_exponential(M, t1 + t2)
    np.testing.assert_allclose(E12, matrix_exponential(M, t1) @ matrix_exponential(M, t2),
                               rtol=1e-10, atol=1e-10 * np.linalg.norm(E12))
    assert np.linalg.det(matrix_exponential(M, t1)) == pytest.approx(np.exp(np.trace(M) * t1),
                                                                    rel=1e-9)


def test_eigenvalues_examples():
    T = np.array([[1.0, 5.0, 2.0], [0.0, -3.0, 1.0], [0.0, 0.0, 7.0]])
    np.testing.assert_allclose(np.sort(eigenvalues(T).real), [-3.0, 1.0, 7.0], atol=1e-12)
    lam = eigenvalues(np.array([[0.0, 1.0], [-7627.0, -4.36]]))
    np.testing.assert_allclose(lam.real, [-2.18, -2.18], rtol=1e-12)
    assert abs(lam[0].imag) == pytest.approx(np.sqrt(7627 - 2.18**2), rel=1e-12)
    np.testing.assert_array_equal(eigenvalues(np.zeros((3, 3))), np.zeros(3))
    assert spectral_radius(np.diag([0.5, -2.0])) == 2.0
    assert is_hurwitz(np.diag([-1.0, -1e-3])) and not is_hurwitz(np.diag([-1.0, 0.0]))


def test_newton_examples():
    r = newton_solve(lambda x: x, [0.5])
    assert abs(r.x[0]) <= 1e-10
    cfg = NewtonConfig(tol=1e-13)
    r = newton_solve(lambda x: x**2 - 2, [1.0], cfg)
    assert r.x[0] == pytest.approx(bisect(lambda x: x**2 - 2, 1, 2, xtol=1e-15), abs=1e-12)
    r = newton_solve(lambda v: [v[0] + v[1] - 1, v[0] - v[1]], [0.0, 0.0])
    np.testing.assert_allclose(r.x, [0.5, 0.5], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-0.6, 0.6), b=st.floats(-3, 3))
def test_newton_result_resubstitutes(a, b):
    # identity minus a contraction: the root exists and the Jacobian stays regular
    F = lambda v: np.array([v[0] - a * np.sin(v[1]) - b, v[1] - a * np.cos(v[0])])
    cfg = NewtonConfig()
    r = newton_solve(F, [0.0, 0.0], cfg)
    assert np.linalg.norm(F(r.x)) <= cfg.tol
    assert r.residual <= cfg.tol


def test_newton_failures():
    with pytest.raises(NewtonError) as exc:
        newton_solve(lambda x: x**2 + 1, [1.0], NewtonConfig(max_iter=20))
    assert exc.value.residual > 0
    with pytest.raises(ValueError):
        NewtonConfig(damping=1.5)
    with pytest.raises(ValueError):
        NewtonConfig(tol=0)
