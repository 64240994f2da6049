import logging

import numpy as np
import pytest

from arlkit.dimension import free_embedding_optimum_check, optimal_dim, recommended_dim


def binary_row(n, seed=0):
    row = np.zeros((1, n))
    row[0, : n // 2] = 1.0
    return row


class TestOptimalDim:
    def test_lambda_one_is_psd(self):
        rng = np.random.default_rng(0)
        y, s = rng.standard_normal((2, 30)), rng.standard_normal((3, 30))
        for mode in ("dense", "lowrank"):
            rep = optimal_dim(y, s, 1.0, mode=mode)
            assert rep.optimal_r == 0
            assert rep.free_optimum == 0.0

    def test_binary_target_lambda_zero_gives_one(self):
        y = binary_row(20)
        s = np.random.default_rng(1).standard_normal((2, 20))
        for mode in ("dense", "lowrank"):
            assert optimal_dim(y, s, 0.0, mode=mode).optimal_r == 1

    def test_dense_lowrank_cross_oracle(self):
        rng = np.random.default_rng(2)
        y, s = rng.standard_normal((2, 40)), rng.standard_normal((3, 40))
        d = optimal_dim(y, s, 0.5, mode="dense")
        l = optimal_dim(y, s, 0.5, mode="lowrank")
        assert d.optimal_r == l.optimal_r
        assert abs(d.free_optimum - l.free_optimum) < 1e-8

    def test_rank_bound(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            r2 = np.random.default_rng(seed)
            p, q = r2.integers(1, 4), r2.integers(1, 4)
            y, s = rng.standard_normal((p, 25)), rng.standard_normal((q, 25))
            rep = optimal_dim(y, s, 0.4, mode="lowrank")
            assert rep.optimal_r <= p + q

    def test_single_row_scaling_invariance(self):
        y = binary_row(16)
        s = np.random.default_rng(4).standard_normal((1, 16))
        for c in (1.0, -2.5, 17.0):
            assert optimal_dim(c * y, s, 0.0, mode="dense").optimal_r == 1

    def test_free_optimum_nonpositive(self):
        rng = np.random.default_rng(5)
        for lam in (0.0, 0.3, 0.8, 1.0):
            rep = optimal_dim(rng.standard_normal((2, 20)), rng.standard_normal((2, 20)), lam)
            assert rep.free_optimum <= 0.0

    def test_eigenvalues_ascending(self):
        rng = np.random.default_rng(6)
        rep = optimal_dim(rng.standard_normal((2, 15)), rng.standard_normal((2, 15)), 0.5)
        assert np.all(np.diff(rep.eigenvalues) >= 0)

    def test_dense_rejects_large_n(self):
        y = np.zeros((1, 2049))
        y[0, 0] = 1.0
        s = np.ones((1, 2049))
        s[0, 0] = 0.0
        with pytest.raises(ValueError, match="lowrank"):
            optimal_dim(y, s, 0.0, mode="dense")

    def test_dense_subsample_path(self):
        rng = np.random.default_rng(7)
        y, s = rng.standard_normal((2, 500)), rng.standard_normal((1, 500))
        rep = optimal_dim(y, s, 0.5, mode="dense", subsample=100, subsample_seed=1)
        assert rep.eigenvalues.shape[0] == 100
        assert rep.optimal_r == optimal_dim(y, s, 0.5, mode="lowrank").optimal_r

    def test_lambda_validation(self):
        with pytest.raises(ValueError, match="lambda"):
            optimal_dim(np.ones((1, 4)), np.ones((1, 4)), -0.1)

    def test_recommended_dim_clamps_with_warning(self, caplog):
        rng = np.random.default_rng(8)
        rep = optimal_dim(rng.standard_normal((2, 10)), rng.standard_normal((1, 10)), 1.0)
        with caplog.at_level(logging.WARNING, logger="arlkit.dimension"):
            assert recommended_dim(rep) == 1
        assert any("clamping" in r.message for r in caplog.records)

    def test_recommended_dim_passthrough(self):
        rng = np.random.default_rng(9)
        rep = optimal_dim(rng.standard_normal((2, 10)), rng.standard_normal((1, 10)), 0.0)
        assert recommended_dim(rep) == rep.optimal_r == 2


class TestFreeEmbeddingOptimum:
    def test_psd_case_nonnegative(self):
        rng = np.random.default_rng(0)
        y, s = rng.standard_normal((2, 12)), rng.standard_normal((2, 12))
        for r in (1, 3, 5):
            assert free_embedding_optimum_check(y, s, 1.0, r, iters=500, seed=0) >= -1e-8

    def test_rank_zero_returns_zero(self):
        rng = np.random.default_rng(1)
        y, s = rng.standard_normal((1, 10)), rng.standard_normal((1, 10))
        assert free_embedding_optimum_check(y, s, 0.5, 0) == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_attains_analytic_negative_sum(self, seed):
        rng = np.random.default_rng(100 + seed)
        y, s = rng.standard_normal((2, 12)), rng.standard_normal((3, 12))
        rep = optimal_dim(y, s, 0.5, mode="dense")
        achieved = free_embedding_optimum_check(y, s, 0.5, rep.optimal_r, iters=4000, seed=seed)
        assert abs(achieved - rep.free_optimum) < 1e-4

    def test_rejects_large_n(self):
        y = np.ones((1, 65))
        with pytest.raises(ValueError, match="n <= 64"):
            free_embedding_optimum_check(y, y, 0.5, 1)
