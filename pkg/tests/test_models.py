import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from stablerules.errors import DimensionMismatch, InvalidLabel, Singular
from stablerules.models import (LinearModel, SvmConfig, fit_dwr, fit_linear_baseline, fit_weighted_svm,
                                fit_weighted_svr, predict, svm_objective, svr_objective, _loss_weights)


def cvx_svm(X, y, c):
    beta, b = cp.Variable(X.shape[1]), cp.Variable()
    obj = 0.5 * cp.sum_squares(beta) + c @ cp.pos(1 - cp.multiply(y, X @ beta + b))
    return cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)


def cvx_svr(X, y, c, eps):
    beta, b = cp.Variable(X.shape[1]), cp.Variable()
    obj = 0.5 * cp.sum_squares(beta) + c @ cp.pos(cp.abs(y - X @ beta - b) - eps)
    return cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)


def cvx_lasso(X, y, lam):
    beta, b = cp.Variable(X.shape[1]), cp.Variable()
    obj = 0.5 * cp.sum_squares(y - X @ beta - b) + lam * cp.norm1(beta)
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    return beta.value


class TestLinearBaselines:
    def test_ols_exact(self, rng):
        X = rng.normal(size=(30, 4))
        beta = np.array([1.0, -2.0, 0.5, 3.0])
        m = fit_linear_baseline(X, X @ beta + 1.5, "ols")
        np.testing.assert_allclose(m.beta, beta, atol=1e-8)
        assert m.b == pytest.approx(1.5, abs=1e-8)

    def test_ridge_limit(self, rng):
        X, y = rng.normal(size=(30, 3)), rng.normal(size=30)
        ols = fit_linear_baseline(X, y, "ols")
        ridge = fit_linear_baseline(X, y, "ridge", 1e-9)
        np.testing.assert_allclose(ridge.beta, ols.beta, atol=1e-6)

    def test_lasso_kills_all(self, rng):
        X, y = rng.normal(size=(30, 3)), rng.normal(size=30)
        Xc, yc = X - X.mean(0), y - y.mean()
        lam = np.abs(Xc.T @ yc).max() * 1.01
        np.testing.assert_array_equal(fit_linear_baseline(X, y, "lasso", lam).beta, 0.0)

    def test_lasso_matches_convex_solver(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            X = rng.normal(size=(40, 5))
            y = X @ rng.normal(size=5) + rng.normal(size=40)
            lam = float(rng.uniform(0.5, 10))
            np.testing.assert_allclose(fit_linear_baseline(X, y, "lasso", lam).beta, cvx_lasso(X, y, lam),
                                       atol=1e-4)

    def test_singular(self):
        X = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
        with pytest.raises(Singular):
            fit_linear_baseline(X, np.arange(5.0), "ols")


class TestWeightedSvm:
    def test_symmetric_pair(self):
        m = fit_weighted_svm(np.array([[-1.0], [1.0]]), np.array([-1.0, 1.0]), cfg=SvmConfig(C=100))
        assert m.b == pytest.approx(0.0, abs=1e-6)
        np.testing.assert_array_equal(predict(m, [[-0.1], [0.1]]), [-1, 1])

    def test_inactive_weights(self):
        X = np.array([[-3.0], [-2.0], [2.0], [3.0]])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        cfg = SvmConfig(C=1.0, mean_one_weights=False)
        a = fit_weighted_svm(X, y, np.full(4, 0.25), cfg)
        b = fit_weighted_svm(X, y, np.array([0.25, 2.0, 0.25, 0.25]), cfg)
        np.testing.assert_allclose(a.beta, b.beta, atol=1e-6)

    def test_matches_convex_solver(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(10, 30))
            X = rng.normal(size=(n, 2))
            y = np.where(X @ np.array([1.0, -1.0]) + 0.5 * rng.normal(size=n) > 0, 1.0, -1.0)
            w = rng.uniform(0, 1, n)
            cfg = SvmConfig(C=float(rng.uniform(0, 2)))
            m = fit_weighted_svm(X, y, w, cfg)
            c = _loss_weights(w, n, cfg)
            ours = svm_objective(m.beta, m.b, X, y, c)
            assert abs(ours - cvx_svm(X, y, c)) < 1e-3

    def test_zero_weights_are_plain_svm(self, rng):
        X = rng.normal(size=(20, 2))
        y = np.where(X[:, 0] > 0, 1.0, -1.0)
        cfg = SvmConfig(C=0.7, mean_one_weights=False)
        np.testing.assert_allclose(fit_weighted_svm(X, y, np.zeros(20), cfg).beta,
                                   fit_weighted_svm(X, y, None, cfg).beta, atol=1e-9)

    def test_objective_history_monotone(self, rng):
        X = rng.normal(size=(25, 2))
        m = fit_weighted_svm(X, np.where(X[:, 1] > 0, 1.0, -1.0), rng.uniform(0, 1, 25))
        assert np.all(np.diff(m.training_meta["objective_history"]) <= 0)

    def test_label_check(self):
        with pytest.raises(InvalidLabel):
            fit_weighted_svm(np.zeros((2, 1)), np.array([0.0, 1.0]))


class TestWeightedSvr:
    def test_interpolates_line(self):
        x = np.linspace(-1, 1, 15)
        m = fit_weighted_svr(x[:, None], 2.5 * x - 1, cfg=SvmConfig(C=1000, epsilon=0.0))
        assert m.beta[0] == pytest.approx(2.5, abs=1e-3)

    def test_wide_tube(self, rng):
        y = rng.normal(size=20)
        m = fit_weighted_svr(rng.normal(size=(20, 2)), y, cfg=SvmConfig(epsilon=10 * np.abs(y - y.mean()).max()))
        np.testing.assert_allclose(m.beta, 0.0, atol=1e-6)
        assert m.training_meta["objective"] == pytest.approx(0.0, abs=1e-6)

    def test_matches_convex_solver(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(10, 30))
            X = rng.normal(size=(n, 2))
            y = X @ np.array([1.0, 2.0]) + 0.3 * rng.normal(size=n)
            w = rng.uniform(0, 1, n)
            cfg = SvmConfig(C=float(rng.uniform(0, 2)), epsilon=float(rng.uniform(0, 0.5)))
            m = fit_weighted_svr(X, y, w, cfg)
            c = _loss_weights(w, n, cfg)
            ours = svr_objective(m.beta, m.b, X, y, c, cfg.epsilon)
            assert abs(ours - cvx_svr(X, y, c, cfg.epsilon)) < 1e-3

    @given(st.integers(0, 2**31))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        X, y, w = rng.normal(size=(15, 2)), rng.normal(size=15), rng.uniform(0, 1, 15)
        perm = rng.permutation(15)
        a = fit_weighted_svr(X, y, w)
        b = fit_weighted_svr(X[perm], y[perm], w[perm])
        np.testing.assert_allclose(a.beta, b.beta, atol=1e-9)
        assert a.b == pytest.approx(b.b, abs=1e-9)


class TestPredict:
    def test_constant_model(self):
        m = LinearModel(np.zeros(3), 0.7, "ols")
        np.testing.assert_allclose(predict(m, np.ones((4, 3))), 0.7)
        np.testing.assert_array_equal(predict(m, np.ones((4, 3)), classify=True), 1.0)

    def test_identity(self, rng):
        X = rng.normal(size=(20, 3))
        y = X @ np.array([1.0, 2.0, 3.0]) - 0.5
        np.testing.assert_allclose(predict(fit_linear_baseline(X, y), X), y, atol=1e-6)

    def test_single_row(self):
        assert predict(LinearModel(np.array([3.0, -1.0]), 0.5, "ols"), [1.0, 2.0])[0] == pytest.approx(1.5)

    def test_width_mismatch(self):
        with pytest.raises(DimensionMismatch):
            predict(LinearModel(np.zeros(3), 0.0, "ols"), np.ones((2, 2)))

    def test_json_round_trip(self):
        m = LinearModel(np.array([1.0, -2.0]), 0.3, "svr", {"C": 1.0})
        back = LinearModel.from_json(m.to_json())
        np.testing.assert_array_equal(back.beta, m.beta)
        assert back.b == m.b and back.kind == m.kind


class TestDwr:
    def test_uncorrelated_matches_ols(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(2000, 3))
        y = X @ np.array([1.0, -1.0, 0.5]) + rng.normal(size=2000)
        dwr = fit_dwr(X, y, lam=600)
        ols = fit_linear_baseline(X, y)
        np.testing.assert_allclose(dwr.model.beta, ols.beta, atol=0.05)

    def test_zero_penalty_is_ols(self, rng):
        X = rng.normal(size=(100, 3))
        y = rng.normal(size=100)
        dwr = fit_dwr(X, y, lam=0.0)
        np.testing.assert_allclose(dwr.model.beta, fit_linear_baseline(X, y).beta, atol=1e-8)
