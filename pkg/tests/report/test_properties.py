import os
import math
import unittest
import tempfile

import numpy as np
import pandas as pd

from ecitarget import DataError
from ecitarget.effort import Candidate, EffortMatrix
from ecitarget.portfolio.generic import make_portfolio
from ecitarget.report import quadratic_fit
from ecitarget.report.properties import (FITTED_SERIES, PANEL_COLUMNS,
                                         build_property_panel, method_means,
                                         property_row, unavailable_row,
                                         write_property_panel)


class QuadraticFitTest(unittest.TestCase):
    def test_exact(self):
        xs = [-2.0, -1.0, 0.0, 1.0, 2.0]
        c0, c1, c2 = quadratic_fit(xs, [x * x for x in xs])
        self.assertAlmostEqual(c0, 0.0)
        self.assertAlmostEqual(c1, 0.0)
        self.assertAlmostEqual(c2, 1.0)

        c0, c1, c2 = quadratic_fit(xs, [3.0] * 5)
        self.assertAlmostEqual(c0, 3.0)
        self.assertAlmostEqual(c1, 0.0)
        self.assertAlmostEqual(c2, 0.0)

    def test_noisy(self):
        rng = np.random.default_rng(3)
        xs = rng.uniform(-2.0, 2.0, 1000)
        ys = 0.5 - 1.0 * xs + 0.25 * xs ** 2 + rng.normal(0.0, 0.1, 1000)
        c0, c1, c2 = quadratic_fit(xs, ys)
        # Comfortably above four standard errors at this sample size
        self.assertAlmostEqual(c0, 0.5, delta=0.03)
        self.assertAlmostEqual(c1, -1.0, delta=0.03)
        self.assertAlmostEqual(c2, 0.25, delta=0.03)

    def test_errors(self):
        with self.assertRaises(DataError):
            quadratic_fit([1.0, 1.0, 2.0, 2.0], [0.0, 1.0, 2.0, 3.0])
        with self.assertRaises(ValueError):
            quadratic_fit([1.0, 2.0, 3.0], [0.0, 1.0])


def portfolio_of(location, method, candidates, target=0.5):
    effort = EffortMatrix.build(location, candidates, {'base': 0.0})
    return make_portfolio(effort, target, effort.candidates, method)


class PropertyPanelTest(unittest.TestCase):
    def test_row(self):
        portfolio = portfolio_of('c', 'optimal', [
            Candidate('a', 1.0, 1.0, rca=0.5, omega_rel=0.25),
            Candidate('b', 2.0, 1.0, rca=0.25, omega_rel=-0.25)])
        row = property_row(portfolio, eci_t=0.1, diversity_t=7, volume=3.0)
        self.assertEqual(set(row), set(PANEL_COLUMNS))
        self.assertEqual(row['count'], 2)
        self.assertEqual(row['total_effort'], 3.0)
        self.assertEqual(row['mean_rca'], 0.375)
        self.assertEqual(row['mean_omega_rel'], 0.0)
        self.assertEqual(row['var_omega_rel'], 0.0625)
        self.assertTrue(row['feasible'])

    def test_empty_selection(self):
        row = property_row(portfolio_of('c', 'optimal', []), 0.0, 1, 0.0)
        self.assertEqual(row['count'], 0)
        self.assertTrue(math.isnan(row['mean_rca']))
        self.assertTrue(math.isnan(row['var_omega_rel']))

    def records(self):
        rng = np.random.default_rng(9)
        for i in range(12):
            eci = float(i) / 4 - 1.5
            for method in ('optimal', 'benchmark'):
                n = int(rng.integers(1, 5))
                candidates = [
                    Candidate(f"p{j}", float(rng.exponential()), 1.0,
                              rca=float(rng.random()),
                              omega_rel=float(rng.normal()))
                    for j in range(n)]
                yield property_row(portfolio_of(f"L{i:02d}", method,
                                                candidates),
                                   eci, 10 + i, float(n))

    def test_panel(self):
        panel = build_property_panel(self.records())
        self.assertEqual(len(panel.rows), 24)
        self.assertEqual(list(panel.rows.columns), list(PANEL_COLUMNS))
        self.assertEqual(list(panel.rows['method'][:2]),
                         ['benchmark', 'optimal'])
        self.assertEqual(len(panel.fits), 2 * len(FITTED_SERIES))
        self.assertFalse(panel.fits[['c0', 'c1', 'c2']].isna().any().any())
        self.assertTrue((panel.fits['n'] == 12).all())

        means = method_means(panel, 'count')
        for method in ('optimal', 'benchmark'):
            subset = panel.rows[panel.rows['method'] == method]
            self.assertAlmostEqual(means[method], subset['count'].mean())

    def test_unavailable_methods_are_kept(self):
        rows = list(self.records())
        for i in range(12, 15):
            rows.append(unavailable_row(f"L{i:02d}", 'benchmark', 1.5,
                                        20, 2.0))
        panel = build_property_panel(rows)
        self.assertEqual(len(panel.rows), 27)

        missing = panel.rows[panel.rows['location'] >= 'L12']
        self.assertEqual(list(missing['method']), ['benchmark'] * 3)
        self.assertFalse(missing['feasible'].any())
        self.assertTrue(missing['total_effort'].isna().all())
        self.assertTrue((missing['target_eci'] == 2.0).all())
        # They don't enter the fits
        self.assertTrue((panel.fits['n'] == 12).all())

    def test_panel_without_spread(self):
        rows = list(self.records())[:4]
        with self.assertLogs(level='WARNING'):
            panel = build_property_panel(rows)
        self.assertTrue(panel.fits['c0'].isna().all())

    def test_write(self):
        panel = build_property_panel(self.records())
        with tempfile.TemporaryDirectory() as tmp:
            rows_path = os.path.join(tmp, 'properties.csv')
            fits_path = os.path.join(tmp, 'property_fits.csv')
            write_property_panel(panel, rows_path, fits_path)
            self.assertEqual(len(pd.read_csv(rows_path)), 24)
            self.assertEqual(list(pd.read_csv(fits_path).columns),
                             ['series', 'method', 'c0', 'c1', 'c2', 'n'])


if __name__ == '__main__':
    unittest.main()
