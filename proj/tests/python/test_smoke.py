"""Smoke tests for the mrash extension module."""

import math
import unittest

import numpy as np

import mrash


class PriorAndShrinkage(unittest.TestCase):
    def test_default_grid(self):
        grid = mrash.default_grid(500, k=20)
        self.assertEqual(len(grid), 20)
        self.assertEqual(grid[0], 0.0)
        self.assertTrue(np.all(np.diff(grid) > 0))

    def test_ridge_shrinkage(self):
        prior = mrash.ScaleMixturePrior(np.array([1.0]))
        self.assertAlmostEqual(mrash.shrink(2.0, prior, 1.0), 1.0, places=12)
        self.assertAlmostEqual(
            mrash.invert_shrink(1.0, prior, 1.0), 2.0, places=8
        )

    def test_responsibilities_simplex(self):
        prior = mrash.ScaleMixturePrior(np.array([0.0, 0.5, 2.0]))
        phi = mrash.responsibilities(1.3, 1.0, prior)
        self.assertAlmostEqual(phi.sum(), 1.0, places=12)
        self.assertTrue(np.all(phi >= 0))

    def test_soft_threshold(self):
        self.assertEqual(mrash.shrink_plr(3.0, "lasso", 1.0), 2.0)
        self.assertEqual(mrash.shrink_plr(-0.5, "lasso", 1.0), 0.0)


class FitAndSimulate(unittest.TestCase):
    def test_fit_monotone_elbo_and_predict(self):
        data = mrash.simulate(120, 40, 5, seed=3)
        fit = mrash.fit(data.X_train, data.y_train, grid_k=10, init="null", seed=1)
        trace = np.asarray(fit.elbo_trace)
        self.assertGreater(len(trace), 0)
        self.assertTrue(np.all(np.diff(trace) >= -1e-8))
        pred = fit.predict(data.X_test)
        self.assertEqual(pred.shape[0], 120)
        score = mrash.rmse_scaled(
            data.y_test, data.X_test, fit.b_bar, fit.intercept, data.sigma2_true, 0.5
        )
        self.assertLess(score, 1.1)
        self.assertGreater(score, 0.3)

    def test_simulation_is_deterministic(self):
        a = mrash.simulate(30, 10, 2, seed=11)
        b = mrash.simulate(30, 10, 2, seed=11)
        np.testing.assert_array_equal(a.X_train, b.X_train)
        np.testing.assert_array_equal(a.y_train, b.y_train)

    def test_plr_ols_limit(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((50, 4))
        y = x @ np.array([1.0, -2.0, 0.5, 0.0]) + 0.1 * rng.standard_normal(50)
        fit = mrash.fit_plr(x, y, "ridge", 0.0, max_iter=50000, tol=1e-12)
        design = np.column_stack([np.ones(50), x])
        ols = np.linalg.lstsq(design, y, rcond=None)[0]
        self.assertAlmostEqual(fit.intercept, ols[0], places=7)
        np.testing.assert_allclose(fit.coefficients, ols[1:], atol=1e-7)

    def test_lasso_cv(self):
        data = mrash.simulate(60, 20, 3, seed=9)
        result = mrash.lasso_cv(data.X_train, data.y_train, n_lambda=40, n_folds=5)
        self.assertEqual(len(result["coefficients"]), 20)
        self.assertGreater(result["lambda_min"], 0.0)


if __name__ == "__main__":
    unittest.main()
