import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from arlkit.numlin import CenteringOperator, center_cols, eigh_sym, spectral_shifted_apply


def random_symmetric(n, seed=0):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return 0.5 * (a + a.T)


class TestEighSym:
    def test_identity(self):
        eig = eigh_sym(np.eye(3))
        np.testing.assert_allclose(eig.values, [1.0, 1.0, 1.0])

    def test_diagonal_sorted_ascending(self):
        eig = eigh_sym(np.diag([3.0, 1.0]))
        np.testing.assert_allclose(eig.values, [1.0, 3.0])
        # eigenvectors are the coordinate axes, in swapped order
        np.testing.assert_allclose(np.abs(eig.vectors), [[0.0, 1.0], [1.0, 0.0]], atol=1e-14)

    def test_reconstruction_oracle(self):
        a = random_symmetric(16, seed=3)
        eig = eigh_sym(a)
        rec = eig.vectors @ np.diag(eig.values) @ eig.vectors.T
        err = np.linalg.norm(rec - a) / np.linalg.norm(a)
        assert err < 1e-10

    def test_orthonormal_vectors(self):
        eig = eigh_sym(random_symmetric(12, seed=5))
        gram = eig.vectors.T @ eig.vectors
        assert np.linalg.norm(gram - np.eye(12)) < 1e-8

    def test_eigenvalue_sum_equals_trace(self):
        a = random_symmetric(20, seed=7)
        eig = eigh_sym(a)
        assert abs(eig.values.sum() - np.trace(a)) <= 1e-8 * max(1.0, abs(np.trace(a)))

    def test_psd_input_nonnegative_values(self):
        b = np.random.default_rng(11).standard_normal((8, 15))
        eig = eigh_sym(b @ b.T)
        assert eig.values.min() >= -1e-9 * eig.values.max()

    def test_deterministic(self):
        a = random_symmetric(9, seed=2)
        e1, e2 = eigh_sym(a), eigh_sym(a)
        np.testing.assert_array_equal(e1.values, e2.values)
        np.testing.assert_array_equal(e1.vectors, e2.vectors)

    def test_non_finite_rejected(self):
        a = np.eye(3)
        a[1, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite input"):
            eigh_sym(a)

    def test_asymmetric_rejected(self):
        a = np.eye(3)
        a[0, 1] = 1e-5
        with pytest.raises(ValueError, match="not symmetric"):
            eigh_sym(a)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            eigh_sym(np.ones((2, 3)))


class TestCenterCols:
    def test_identical_columns_become_zero(self):
        m = np.outer([1.0, 2.0, -1.0], np.ones(5))
        np.testing.assert_allclose(center_cols(m), 0.0, atol=1e-15)

    def test_mean_subtraction(self):
        np.testing.assert_allclose(center_cols(np.array([[1.0, 3.0]])), [[-1.0, 1.0]])

    def test_matches_explicit_projector(self):
        m = np.random.default_rng(0).standard_normal((4, 10))
        d = np.eye(10) - np.full((10, 10), 0.1)
        assert np.abs(center_cols(m) - m @ d).max() < 1e-12

    def test_row_sums_zero(self):
        m = np.random.default_rng(1).standard_normal((6, 33))
        out = center_cols(m)
        tol = 1e-9 * 33 * np.abs(m).max()
        assert np.abs(out.sum(axis=1)).max() < tol

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (3, 7), elements=st.floats(-100, 100)))
    def test_idempotent(self, m):
        once = center_cols(m)
        np.testing.assert_allclose(center_cols(once), once, atol=1e-9)


class TestCenteringOperator:
    def test_annihilates_ones(self):
        d = CenteringOperator(8).materialize()
        np.testing.assert_allclose(d @ np.ones(8), 0.0, atol=1e-15)

    def test_idempotent_and_symmetric(self):
        d = CenteringOperator(9).materialize()
        np.testing.assert_allclose(d @ d, d, atol=1e-14)
        np.testing.assert_allclose(d, d.T)

    def test_apply_matches_materialized(self):
        k = np.random.default_rng(4).standard_normal((10, 10))
        op = CenteringOperator(10)
        d = op.materialize()
        np.testing.assert_allclose(op.apply_both(k), d @ k @ d, atol=1e-13)
        np.testing.assert_allclose(op.apply_left(k), d @ k, atol=1e-13)
        np.testing.assert_allclose(op.apply_right(k), k @ d, atol=1e-13)

    def test_refuses_large_materialization(self):
        with pytest.raises(ValueError, match="materialize"):
            CenteringOperator(65).materialize()


class TestSpectralShiftedApply:
    def test_zero_matrix(self):
        eig = eigh_sym(np.zeros((4, 4)))
        rhs = np.arange(4.0)
        np.testing.assert_allclose(spectral_shifted_apply(eig, 2.0, rhs), rhs / 2.0)

    def test_identity(self):
        eig = eigh_sym(np.eye(5))
        rhs = np.random.default_rng(0).standard_normal((5, 2))
        np.testing.assert_allclose(spectral_shifted_apply(eig, 1.0, rhs), rhs / 2.0)

    def test_matches_dense_solve(self):
        a = random_symmetric(12, seed=9)
        eig = eigh_sym(a)
        rhs = np.random.default_rng(1).standard_normal(12)
        c = 0.7
        x = spectral_shifted_apply(eig, c, rhs)
        direct = np.linalg.solve(a @ a + c * np.eye(12), rhs)
        assert np.abs(x - direct).max() < 1e-8
        assert np.linalg.norm((a @ a + c * np.eye(12)) @ x - rhs) <= 1e-7 * np.linalg.norm(rhs)

    def test_linear_in_rhs(self):
        eig = eigh_sym(random_symmetric(6, seed=2))
        r1 = np.random.default_rng(2).standard_normal(6)
        r2 = np.random.default_rng(3).standard_normal(6)
        lhs = spectral_shifted_apply(eig, 0.3, 2.0 * r1 - r2)
        rhs = 2.0 * spectral_shifted_apply(eig, 0.3, r1) - spectral_shifted_apply(eig, 0.3, r2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_rejects_nonpositive_shift(self):
        eig = eigh_sym(np.eye(3))
        with pytest.raises(ValueError, match="positive"):
            spectral_shifted_apply(eig, 0.0, np.ones(3))

    def test_shape_mismatch(self):
        eig = eigh_sym(np.eye(3))
        with pytest.raises(ValueError, match="rows"):
            spectral_shifted_apply(eig, 1.0, np.ones(4))
