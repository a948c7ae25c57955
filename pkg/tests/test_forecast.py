import os
import unittest
import tempfile

import numpy as np
import pandas as pd

from ecitarget import ConfigError, Regime
from ecitarget.complexity import (SpecializationSnapshot, YearState,
                                  relatedness_field, compute_eci_pci,
                                  eci_of_row)
from ecitarget.forecast import (
    SPECIALIZATION_THRESHOLD, Variant, RegressionError, ModelMismatchError,
    RegressionRow, RowSet, SteppingstoneModel, log_rca, assemble_rows,
    fit_ols, average_models, start_years, calibrate, sweep,
    write_models_csv, write_sweep_csv, predict_future)


TRUTH = (0.05, 0.6, 0.2, 0.18, 0.02)


def make_state(year, rca, locations=None, activities=None):
    rca = np.asarray(rca, dtype=float)
    locations = locations or [f"c{i}" for i in range(rca.shape[0])]
    activities = activities or [f"p{j}" for j in range(rca.shape[1])]
    snapshot = SpecializationSnapshot.from_rca(year, locations, activities,
                                               rca)
    return YearState(snapshot, relatedness_field(snapshot))


def random_history(first=2001, last=2012, shape=(6, 10), seed=0):
    rng = np.random.default_rng(seed)
    history = {}
    for year in range(first, last + 1):
        rca = rng.exponential(1.0, shape)
        # Every activity keeps at least one specialization
        for j in range(shape[1]):
            rca[j % shape[0], j] = 2.0 + rng.random()
        history[year] = make_state(year, rca)
    return history


def synthetic_rows(n, coefficients, sigma=0.0, seed=0):
    rng = np.random.default_rng(seed)
    x = np.column_stack((rng.normal(0.5, 0.3, n), rng.normal(0.4, 0.3, n),
                         rng.random(n), rng.normal(0.0, 0.1, n)))
    y = coefficients[0] + x @ np.asarray(coefficients[1:]) \
        + rng.normal(0.0, sigma, n) * (sigma > 0)
    ids = np.array([f"{i:05d}" for i in range(n)], dtype=object)
    return RowSet(Regime.ENTRY, 2001, 5, 10, ids, ids, y, x)


def make_model(regime, coefficients, tau=5, delta_t=10):
    nan = (np.nan,) * 5
    return SteppingstoneModel(regime, delta_t, tau, Variant.FULL,
                              tuple(coefficients), nan, nan, 0.0, 0.0, 0,
                              (2001,))


IDENTITY = (0.0, 1.0, 0.0, 0.0, 0.0)


class StartYearsTest(unittest.TestCase):
    def test_start_years(self):
        """
        A 10 year horizon over the smoothed years 2001-2022 leaves the
        start years 2001 to 2012.
        """

        self.assertEqual(start_years(range(2001, 2023), 5, 10),
                         list(range(2001, 2013)))
        self.assertEqual(start_years([2001, 2003, 2006, 2011], 5, 10),
                         [2001])
        self.assertEqual(start_years(range(2001, 2005), 5, 10), [])


class AssembleRowsTest(unittest.TestCase):
    def test_years_and_regimes(self):
        """
        Starting in 2012 with tau = 5 and delta_t = 10 uses the
        steppingstone in 2017 and the horizon in 2022.
        """

        base = [[0.5, 2.0], [1.0, 0.0]]
        history = {
            2012: make_state(2012, base),
            2017: make_state(2017, [[1.5, 2.0], [1.0, 3.0]]),
            2022: make_state(2022, [[3.0, 0.2], [0.0, 1.0]])
        }
        entry = assemble_rows(history, 2012, 5, 10, Regime.ENTRY)
        exit_ = assemble_rows(history, 2012, 5, 10, Regime.EXIT)

        self.assertEqual(len(entry) + len(exit_), 4)
        self.assertEqual(list(zip(entry.locations, entry.activities)),
                         [('c0', 'p0'), ('c1', 'p1')])
        self.assertEqual(list(zip(exit_.locations, exit_.activities)),
                         [('c0', 'p1'), ('c1', 'p0')])
        np.testing.assert_allclose(entry.y, np.log([4.0, 2.0]))
        np.testing.assert_allclose(entry.x[:, 0], np.log([2.5, 4.0]))
        np.testing.assert_allclose(entry.x[:, 1], np.log([1.5, 1.0]))
        # A threshold of exactly one is a specialization
        self.assertTrue(np.all(exit_.x[:, 1] >= SPECIALIZATION_THRESHOLD))

        rows = list(entry)
        self.assertIsInstance(rows[0], RegressionRow)
        self.assertEqual(rows[0].start_year, 2012)
        self.assertEqual(rows[0].regime, Regime.ENTRY)

    def test_universe_intersection(self):
        history = {
            2001: make_state(2001, [[2.0, 0.5], [0.5, 2.0]],
                             ['a', 'b'], ['x', 'y']),
            2002: make_state(2002, [[2.0, 0.5], [0.5, 2.0]],
                             ['a', 'c'], ['x', 'y']),
            2003: make_state(2003, [[2.0, 0.5], [0.5, 2.0]],
                             ['a', 'b'], ['x', 'y'])
        }
        rows = assemble_rows(history, 2001, 1, 2, Regime.ENTRY)
        self.assertEqual(list(rows.locations), ['a'])
        self.assertEqual(list(rows.activities), ['y'])

    def test_regimes_partition_the_cells(self):
        history = random_history()
        for start in (2001, 2002):
            entry = assemble_rows(history, start, 5, 10, Regime.ENTRY)
            exit_ = assemble_rows(history, start, 5, 10, Regime.EXIT)
            entry_cells = set(zip(entry.locations, entry.activities))
            exit_cells = set(zip(exit_.locations, exit_.activities))
            self.assertEqual(len(entry_cells), len(entry))
            self.assertEqual(len(exit_cells), len(exit_))
            self.assertFalse(entry_cells & exit_cells)
            self.assertEqual(len(entry_cells | exit_cells), 6 * 10)
            # Entry cells aren't specializations at the start, exit ones are
            self.assertTrue(np.all(entry.x[:, 1] < SPECIALIZATION_THRESHOLD))
            self.assertTrue(np.all(exit_.x[:, 1] >= SPECIALIZATION_THRESHOLD))

    def test_invalid_timing(self):
        history = random_history()
        with self.assertRaises(ConfigError):
            assemble_rows(history, 2001, 5, 5, Regime.ENTRY)
        with self.assertRaises(ConfigError):
            assemble_rows(history, 2001, 0, 5, Regime.ENTRY)


class FitTest(unittest.TestCase):
    def test_zero_noise_recovery(self):
        model = fit_ols(synthetic_rows(500, TRUTH))
        np.testing.assert_allclose(model.coefficients, TRUTH, atol=1e-8)
        self.assertAlmostEqual(model.r2, 1.0)
        self.assertEqual(model.n_obs, 500)
        self.assertEqual(model.start_years, (2001,))

    def test_noise_recovery(self):
        """
        With Gaussian noise every coefficient should be within 4 standard
        errors of the truth in almost every trial.
        """

        covered = 0
        for seed in range(100):
            model = fit_ols(synthetic_rows(10000, TRUTH, sigma=0.1,
                                           seed=seed))
            errors = np.abs(np.array(model.coefficients) - TRUTH)
            if np.all(errors <= 4 * np.array(model.std_errors)):
                covered += 1
        self.assertGreaterEqual(covered, 95)

    def test_p_values(self):
        model = fit_ols(synthetic_rows(1000, TRUTH, sigma=0.1))
        # Large samples use the normal approximation
        self.assertLess(model.p_values[1], 1e-10)
        small = fit_ols(synthetic_rows(50, (0.0, 0.0, 0.0, 0.0, 0.5),
                                       sigma=0.5, seed=1))
        self.assertTrue(all(0 <= p <= 1 for p in small.p_values))

    def test_variants(self):
        rows = synthetic_rows(200, TRUTH, sigma=0.05)
        stone = fit_ols(rows, Variant.STEPPINGSTONE)
        self.assertTrue(np.isnan(stone.b3) and np.isnan(stone.b4))
        self.assertFalse(np.isnan(stone.b1))
        related = fit_ols(rows, Variant.RELATEDNESS)
        self.assertTrue(np.isnan(related.b1) and np.isnan(related.b2))
        self.assertFalse(np.isnan(related.b0))

        with self.assertRaises(ModelMismatchError):
            stone.predict(0.0, 0.0, 0.0, 0.0)

    def test_residuals_are_orthogonal(self):
        rows = synthetic_rows(500, TRUTH, sigma=0.3, seed=4)
        model = fit_ols(rows)
        b = np.array(model.coefficients)
        resid = rows.y - (b[0] + rows.x @ b[1:])
        design = np.column_stack((np.ones(len(rows)), rows.x))
        np.testing.assert_allclose(design.T @ resid, 0.0, atol=1e-8)

        ssr = float(resid @ resid)
        sst = float(((rows.y - rows.y.mean()) ** 2).sum())
        self.assertAlmostEqual(model.r2, 1.0 - ssr / sst, places=10)
        self.assertLess(model.adj_r2, model.r2)

    def test_regression_errors(self):
        with self.assertRaises(RegressionError):
            fit_ols(synthetic_rows(5, TRUTH))

        rows = synthetic_rows(50, TRUTH)
        rows.x[:, 2] = 0.0
        with self.assertRaises(RegressionError):
            fit_ols(rows)

        with self.assertRaises(RegressionError):
            RowSet.from_rows([], 5, 10)


class AverageTest(unittest.TestCase):
    def test_single_model(self):
        model = fit_ols(synthetic_rows(100, TRUTH, sigma=0.1))
        self.assertEqual(average_models([model]), model)

    def test_mean(self):
        a = make_model(Regime.ENTRY, (0.0, 0.6, 0.0, 0.0, 0.0))
        b = make_model(Regime.ENTRY, (0.0, 0.7, 0.0, 0.0, 0.0))
        b = SteppingstoneModel(b.regime, b.delta_t, b.tau, b.variant,
                               b.coefficients, b.std_errors, b.p_values,
                               b.r2, b.adj_r2, b.n_obs, (2002,))
        averaged = average_models([b, a])
        self.assertAlmostEqual(averaged.b1, 0.65)
        self.assertEqual(averaged.start_years, (2001, 2002))

    def test_mismatch(self):
        with self.assertRaises(ModelMismatchError):
            average_models([make_model(Regime.ENTRY, IDENTITY),
                            make_model(Regime.EXIT, IDENTITY)])
        with self.assertRaises(ModelMismatchError):
            average_models([make_model(Regime.ENTRY, IDENTITY, tau=4),
                            make_model(Regime.ENTRY, IDENTITY, tau=5)])
        with self.assertRaises(RegressionError):
            average_models([])


class CalibrateTest(unittest.TestCase):
    def setUp(self):
        self.history = random_history()

    def test_calibrate(self):
        calibration = calibrate(self.history, Regime.ENTRY, 2, 4)
        self.assertEqual(calibration.averaged.start_years,
                         tuple(range(2001, 2009)))
        self.assertEqual(len(calibration.per_year), 8)
        np.testing.assert_allclose(
            calibration.averaged.coefficients,
            np.mean([m.coefficients for m in calibration.per_year], axis=0))

        parallel = calibrate(self.history, Regime.ENTRY, 2, 4, workers=3)
        self.assertEqual(parallel.averaged.coefficients,
                         calibration.averaged.coefficients)

    def test_no_start_year(self):
        with self.assertRaises(RegressionError):
            calibrate(self.history, Regime.EXIT, 5, 20)

    def test_sweep_and_csv(self):
        models = sweep(self.history, range(1, 4), range(2, 5))
        cells = [(m.delta_t, m.tau, m.regime) for m in models]
        self.assertEqual(len(cells), 12)
        self.assertEqual(cells[0], (2, 1, Regime.ENTRY))
        self.assertEqual(cells[-1], (4, 3, Regime.EXIT))

        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'sweep.csv')
            write_sweep_csv(models, path)
            sweep_rows = pd.read_csv(path)
            path = os.path.join(tmp, 'models.csv')
            write_models_csv([calibrate(self.history, Regime.EXIT, 2, 4)],
                             path)
            model_rows = pd.read_csv(path)

        self.assertEqual(len(sweep_rows), 12 * 6)
        self.assertEqual(list(sweep_rows.columns),
                         ['delta_t', 'tau', 'regime', 'coefficient',
                          'estimate', 'se', 'p'])
        self.assertEqual(list(model_rows['kind']),
                         ['averaged'] + ['start_year'] * 8)
        self.assertIn('b4', model_rows.columns)


class PredictTest(unittest.TestCase):
    def test_identity_model(self):
        """
        With b1 = 1 and every other coefficient zero the forecast is the
        current matrix, including the cells at RCA = 1 exactly.
        """

        rca = [[1.0, 0.5, 0.0], [2.0, 1.0, 0.9], [3.0, 2.0, 1.0]]
        state = make_state(2022, rca)
        prediction = predict_future(make_model(Regime.ENTRY, IDENTITY),
                                    make_model(Regime.EXIT, IDENTITY),
                                    state)
        np.testing.assert_allclose(prediction.r_hat, log_rca(rca))
        np.testing.assert_array_equal(prediction.m_pred, state.snapshot.m)
        self.assertEqual(prediction.year, 2032)
        self.assertEqual(prediction.base_year, 2022)

        reference = compute_eci_pci(state.snapshot.m, state.snapshot.locations,
                                    state.snapshot.activities)
        np.testing.assert_allclose(prediction.pci_future, reference.pci)
        for i, location in enumerate(state.snapshot.locations):
            self.assertAlmostEqual(
                prediction.eci_pred[location],
                eci_of_row(state.snapshot.m[i], reference.pci))

    def test_regimes_and_empty_rows(self):
        """
        Exit cells lose a unit of log-RCA, so only the large ones survive
        and the first location is left without specializations.
        """

        rca = [[1.5, 0.0, 0.0], [5.0, 0.5, 0.0], [5.0, 5.0, 0.2],
               [5.0, 5.0, 5.0]]
        state = make_state(2022, rca)
        with self.assertLogs(level='WARNING'):
            prediction = predict_future(
                make_model(Regime.ENTRY, IDENTITY),
                make_model(Regime.EXIT, (-1.0, 1.0, 0.0, 0.0, 0.0)),
                state)
        np.testing.assert_array_equal(prediction.m_pred,
                                      [[0, 0, 0], [1, 0, 0], [1, 1, 0],
                                       [1, 1, 1]])
        self.assertEqual(prediction.empty_locations, ('c0',))
        self.assertEqual(sorted(prediction.eci_pred), ['c1', 'c2', 'c3'])
        self.assertFalse(np.isnan(prediction.pci_future).any())

    def test_monotone_in_current_rca(self):
        """
        With nonnegative b1, raising the RCA of a cell without changing
        whether it's a specialization never lowers its forecast, and leaves
        the other cells alone.
        """

        entry = make_model(Regime.ENTRY, (-0.3, 0.5, 0.2, 0.4, 0.1))
        exit_ = make_model(Regime.EXIT, (-0.1, 0.5, 0.3, 0.2, 0.1))
        rng = np.random.default_rng(8)
        rca = rng.exponential(1.0, (5, 8))
        for j in range(8):
            rca[j % 5, j] = 2.0
        before = predict_future(entry, exit_, make_state(2022, rca))
        for i, j in ((0, 1), (1, 0), (2, 7), (4, 3)):
            raised = rca.copy()
            if rca[i, j] < 1:
                raised[i, j] = (rca[i, j] + 1.0) / 2
            else:
                raised[i, j] = rca[i, j] * 1.5
            after = predict_future(entry, exit_, make_state(2022, raised))
            self.assertGreater(after.r_hat[i, j], before.r_hat[i, j])
            self.assertTrue(np.all(after.m_pred >= before.m_pred))
            others = np.ones(rca.shape, dtype=bool)
            others[i, j] = False
            np.testing.assert_array_equal(after.r_hat[others],
                                          before.r_hat[others])

    def test_mismatched_models(self):
        state = make_state(2022, [[1.0, 0.5], [0.5, 1.0]])
        with self.assertRaises(ModelMismatchError):
            predict_future(make_model(Regime.EXIT, IDENTITY),
                           make_model(Regime.ENTRY, IDENTITY), state)
        with self.assertRaises(ModelMismatchError):
            predict_future(make_model(Regime.ENTRY, IDENTITY, tau=4),
                           make_model(Regime.EXIT, IDENTITY), state)


if __name__ == '__main__':
    unittest.main()
