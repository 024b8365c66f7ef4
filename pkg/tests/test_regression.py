"""Regression core: expansion, soft-thresholding, LASSO oracles, KKT."""

import json

import numpy as np
import pytest

from throttleid.regression import (BasisSpec, ConvergenceError, compute_moments,
                                   expand, fit_from_moments, fit_lasso,
                                   kkt_residual, model_from_json, model_to_json,
                                   predict, rmse, soft_threshold)

rng = np.random.default_rng(42)


class TestExpand:
    def test_linear(self):
        np.testing.assert_array_equal(
            expand(np.array([3.0, 5.0]), BasisSpec("linear")), [1, 3, 5])

    def test_elementwise_poly(self):
        np.testing.assert_array_equal(
            expand(np.array([3.0, 5.0]), BasisSpec("elementwise-poly", 2)),
            [1, 3, 5, 9, 25])

    def test_full_quadratic(self):
        np.testing.assert_array_equal(
            expand(np.array([3.0, 5.0]), BasisSpec("full-quadratic")),
            [1, 3, 5, 9, 15, 25])

    def test_no_bias(self):
        np.testing.assert_array_equal(
            expand(np.array([2.0]), BasisSpec("linear", include_bias=False)), [2])

    @pytest.mark.parametrize("kind,degree", [("linear", 1), ("elementwise-poly", 2),
                                             ("elementwise-poly", 3), ("full-quadratic", 2)])
    def test_width_formula(self, kind, degree):
        basis = BasisSpec(kind, degree)
        for p in (1, 4, 11, 76):
            x = rng.standard_normal(p)
            assert expand(x, basis).shape[0] == basis.width(p)

    def test_batch_matches_single(self):
        basis = BasisSpec("full-quadratic")
        X = rng.standard_normal((6, 5))
        batch = expand(X, basis)
        for i in range(6):
            np.testing.assert_array_equal(batch[i], expand(X[i], basis))


class TestSoftThreshold:
    def test_cases(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(-3.0, 1.0) == -2.0

    def test_zero_threshold_identity(self):
        z = rng.standard_normal(50)
        np.testing.assert_array_equal(soft_threshold(z, 0.0), z)

    def test_shrinks_toward_zero(self):
        z = rng.standard_normal(200) * 5
        a = 0.7
        s = soft_threshold(z, a)
        assert np.all(np.abs(s) <= np.abs(z))
        assert np.all(s[np.abs(z) <= a] == 0.0)


class TestFitLasso:
    def test_ols_limit_matches_normal_equations(self):
        X = rng.standard_normal((200, 20))
        Y = rng.standard_normal((200, 7))
        model = fit_lasso(X, Y, 0.0, standardize=False)
        oracle = np.linalg.solve(X.T @ X, X.T @ Y).T
        rel = np.max(np.abs(model.K - oracle)) / np.max(np.abs(oracle))
        assert rel < 1e-6

    def test_tiny_mu_close_to_ols(self):
        X = rng.standard_normal((150, 10))
        y = X @ rng.standard_normal((10, 1)) + 0.01 * rng.standard_normal((150, 1))
        ols = np.linalg.solve(X.T @ X, X.T @ y).ravel()
        near = fit_lasso(X, y, 1e-12, standardize=False).K.ravel()
        np.testing.assert_allclose(near, ols, rtol=1e-6, atol=1e-9)

    def test_null_solution_threshold(self):
        X = rng.standard_normal((100, 8))
        X -= X.mean(axis=0)
        y = rng.standard_normal((100, 1))
        y -= y.mean(axis=0)
        mu_max = np.max(np.abs(X.T @ y))
        model = fit_lasso(X, y, mu_max * (1 + 1e-12), standardize=False)
        assert np.count_nonzero(model.K) == 0
        assert model.sparsity == 1.0

    def test_univariate_closed_form(self):
        for _ in range(25):
            phi = rng.standard_normal((60, 1))
            y = rng.standard_normal((60, 1))
            mu = float(rng.uniform(0, 20))
            model = fit_lasso(phi, y, mu, standardize=False)
            expected = soft_threshold(float(phi[:, 0] @ y[:, 0]), mu) \
                / float(phi[:, 0] @ phi[:, 0])
            assert abs(model.K[0, 0] - expected) <= 1e-10 * max(1.0, abs(expected))

    def test_kkt_certificate(self):
        X = rng.standard_normal((300, 25))
        Y = rng.standard_normal((300, 3))
        for mu in (1e-4, 1e-3, 1e-2, 1.0, 10.0):
            model = fit_lasso(X, Y, mu, standardize=False, tol=1e-12)
            assert model.kkt <= 1e-6

    def test_monotone_objective(self):
        X = rng.standard_normal((120, 15))
        Y = rng.standard_normal((120, 2))
        model = fit_lasso(X, Y, 2.0, standardize=False, track_objective=True)
        hist = np.array(model._objective_history)
        assert np.all(np.diff(hist) <= 1e-9 * max(1.0, hist[0]))

    def test_nonfinite_rejected(self):
        X = rng.standard_normal((10, 3))
        Y = np.full((10, 1), np.nan)
        with pytest.raises(ValueError):
            fit_lasso(X, Y, 0.1)

    def test_negative_mu_rejected(self):
        X = rng.standard_normal((10, 3))
        with pytest.raises(ValueError):
            fit_lasso(X, X[:, :1], -1.0)

    def test_nonconvergence_raises(self):
        X = rng.standard_normal((80, 12))
        X[:, 1] = X[:, 0] + 1e-9 * rng.standard_normal(80)  # near-duplicate column
        y = X @ np.ones((12, 1))
        with pytest.raises(ConvergenceError) as exc:
            fit_lasso(X, y, 0.0, standardize=False, max_sweeps=2, tol=1e-14,
                      exact_polish=False)
        assert exc.value.kkt_residual >= 0.0

    def test_sparsity_weakly_monotone_in_mu(self):
        X = rng.standard_normal((400, 30))
        K_true = np.zeros((30, 1))
        K_true[:5] = rng.standard_normal((5, 1)) * 3
        y = X @ K_true + 0.1 * rng.standard_normal((400, 1))
        mus = np.logspace(-4, 0, 9)
        sp = [fit_lasso(X, y, mu, penalty_scale="rows").sparsity for mu in mus]
        # grid-level trend: allow one-column ties, no systematic decrease
        assert sp[-1] > sp[0]
        assert all(b >= a - 1.0 / 30 for a, b in zip(sp, sp[1:]))

    def test_penalty_scaling_modes(self):
        X = rng.standard_normal((400, 6))
        y = X @ np.ones((6, 1))
        a = fit_lasso(X, y, 1e-3, penalty_scale="rows")
        b = fit_lasso(X, y, 1e-3 * 400, penalty_scale="none")
        np.testing.assert_allclose(a.K, b.K, rtol=1e-10, atol=1e-12)
        c = fit_lasso(X, y, 1e-3, penalty_scale="sqrt-rows")
        d = fit_lasso(X, y, 1e-3 * 20.0, penalty_scale="none")
        np.testing.assert_allclose(c.K, d.K, rtol=1e-10, atol=1e-12)
        with pytest.raises(ValueError):
            fit_lasso(X, y, 1e-3, penalty_scale="bogus")


class TestPredict:
    def test_zero_model(self):
        X = rng.standard_normal((50, 4))
        y = np.zeros((50, 2))
        model = fit_lasso(X, y, 1.0, standardize=False)
        np.testing.assert_array_equal(predict(model, X[0]), [0.0, 0.0])

    def test_linear_system_recovery(self):
        # exact linear synthetic data: mu=0 fit reproduces A x
        A = rng.standard_normal((7, 9))
        X = rng.standard_normal((300, 9))
        Y = X @ A.T
        basis = BasisSpec("linear")
        model = fit_lasso(expand(X, basis), Y, 0.0, basis=basis)
        x_new = rng.standard_normal(9)
        np.testing.assert_allclose(predict(model, x_new), A @ x_new,
                                   rtol=1e-6, atol=1e-8)

    def test_training_rows_match_interpolating_fit(self):
        X = rng.standard_normal((40, 10))
        Y = X @ rng.standard_normal((10, 3))
        model = fit_lasso(X, Y, 0.0, standardize=False, tol=1e-12)
        np.testing.assert_allclose(predict(model, X), Y, atol=1e-8)

    def test_width_mismatch_rejected(self):
        basis = BasisSpec("linear")
        X = rng.standard_normal((30, 5))
        model = fit_lasso(expand(X, basis), X[:, :2], 0.1, basis=basis)
        with pytest.raises(ValueError):
            predict(model, rng.standard_normal(7))

    def test_scale_equivariance(self):
        # predicting with the de-standardized K equals predicting in
        # standardized coordinates and mapping back
        basis = BasisSpec("elementwise-poly", 2)
        X = rng.standard_normal((200, 6)) * np.array([1, 10, 100, 1e3, 1e4, 1e5])
        Y = rng.standard_normal((200, 3)) * np.array([1.0, 50.0, 2e4])
        Phi = expand(X, basis)
        model = fit_lasso(Phi, Y, 0.05, basis=basis, penalty_scale="rows")
        m = compute_moments(Phi, Y, standardize=True)
        phis = (Phi - m.std.x_mean) / m.std.x_scale
        ys = phis @ model.W_std * m.std.y_scale + m.std.y_mean
        np.testing.assert_allclose(predict(model, X), ys, rtol=1e-10, atol=1e-8)


class TestWarmStart:
    def test_warm_equals_cold(self):
        X = rng.standard_normal((250, 18))
        y = X @ (rng.standard_normal((18, 2)) * (rng.random((18, 2)) > 0.5))
        y += 0.05 * rng.standard_normal(y.shape)
        m = compute_moments(X, y, standardize=True)
        cold = fit_from_moments(m, 1e-2, penalty_scale="rows", track_objective=True)
        hot_seed = fit_from_moments(m, 3e-2, penalty_scale="rows")
        warm = fit_from_moments(m, 1e-2, penalty_scale="rows", w0=hot_seed.W_std,
                                track_objective=True)
        f_cold = cold._objective_history[-1]
        f_warm = warm._objective_history[-1]
        assert abs(f_cold - f_warm) <= 1e-8 * max(1.0, abs(f_cold))


class TestRMSE:
    def test_identity(self):
        Y = rng.standard_normal((20, 7))
        per, agg = rmse(Y, Y)
        assert np.all(per == 0.0) and agg == 0.0

    def test_constant_offset(self):
        Y = rng.standard_normal((30, 7))
        P = Y.copy()
        P[:, 2] += 2.0
        per, _ = rmse(P, Y)
        assert per[2] == pytest.approx(2.0)
        assert np.all(np.delete(per, 2) == 0.0)

    def test_single_row(self):
        per, agg = rmse(np.array([[3, 4, 0, 0, 0, 0, 0]]),
                        np.zeros((1, 7)))
        np.testing.assert_allclose(per, [3, 4, 0, 0, 0, 0, 0])
        assert agg == pytest.approx(np.sqrt(25 / 7))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rmse(np.zeros((0, 7)), np.zeros((0, 7)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            rmse(np.zeros((3, 7)), np.zeros((4, 7)))


class TestPersistence:
    def test_json_roundtrip_bit_identical(self, tmp_path):
        basis = BasisSpec("elementwise-poly", 2)
        X = rng.standard_normal((150, 8)) * 50
        Y = np.column_stack([X @ rng.standard_normal(8) for _ in range(7)])
        Phi = expand(X, basis)
        model = fit_lasso(Phi, Y, 1e-3, basis=basis, n_history=None,
                          penalty_scale="sqrt-rows")
        path = tmp_path / "model.json"
        model_to_json(model, path)
        again = model_from_json(path)
        assert np.array_equal(again.K, model.K)
        np.testing.assert_array_equal(
            predict(again, X), predict(model, X))
        assert again.mu == model.mu and again.sparsity == model.sparsity

    def test_rejects_foreign_json(self, tmp_path):
        p = tmp_path / "other.json"
        p.write_text(json.dumps({"something": 1}))
        with pytest.raises(ValueError):
            model_from_json(p)


class TestStandardization:
    def test_apply_invert_identity(self):
        X = rng.standard_normal((100, 12)) * np.logspace(0, 6, 12)
        m = compute_moments(X, rng.standard_normal((100, 2)), standardize=True)
        back = m.std.invert_x(m.std.apply_x(X))
        np.testing.assert_allclose(back, X, rtol=1e-12, atol=1e-9)

    def test_constant_columns_scale_one(self):
        X = np.column_stack([np.ones(50), np.full(50, 7.0),
                             rng.standard_normal(50)])
        m = compute_moments(X, rng.standard_normal((50, 1)), standardize=True)
        assert m.std.x_scale[0] == 1.0 and m.std.x_scale[1] == 1.0
        assert m.const_cols[0] and m.const_cols[1] and not m.const_cols[2]

    def test_kkt_residual_zero_for_exact_solution(self):
        X = rng.standard_normal((100, 5))
        y = X @ np.ones((5, 1))
        m = compute_moments(X, y, standardize=False)
        W = np.ones((5, 1))
        assert kkt_residual(W, m, 0.0) < 1e-9
