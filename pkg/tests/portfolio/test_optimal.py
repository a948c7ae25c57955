import math
import itertools
import unittest

import numpy as np

from ecitarget.complexity import EmptySpecializationError
from ecitarget.portfolio import (optimize_portfolio, brute_force_portfolio,
                                 benchmark_portfolio)
from ecitarget.portfolio.generic import achieved_eci, selectable

from tests.portfolio import effort_of, random_effort


class OptimalTest(unittest.TestCase):
    def test_small_example(self):
        """
        The baseline is short of the target by 0.25. Candidate a covers it
        alone for 1.0, while b and c together cover it for 1.125. The values
        are dyadic so that the exact tie of a is representable.
        """

        effort = effort_of([('a', 1.0, 0.75), ('b', 0.625, 0.6875),
                            ('c', 0.5, 0.625)], [0.25])
        for select in (optimize_portfolio, brute_force_portfolio):
            portfolio = select(effort, 0.5)
            self.assertEqual(portfolio.activities, ('a',))
            self.assertEqual(portfolio.total_effort, 1.0)
            self.assertTrue(portfolio.feasible)
            self.assertEqual(portfolio.achieved_eci, 0.5)

    def test_target_already_met(self):
        effort = effort_of([('a', 1.0, 0.9)], [0.25, 0.75])
        portfolio = optimize_portfolio(effort, 0.5)
        self.assertEqual(portfolio.selected, ())
        self.assertEqual(portfolio.total_effort, 0.0)
        self.assertTrue(portfolio.feasible)
        self.assertEqual(portfolio.eci_baseline, 0.5)
        self.assertEqual(portfolio.method, 'optimal')

    def test_no_candidates(self):
        effort = effort_of([], [0.5])
        self.assertTrue(optimize_portfolio(effort, 0.25).feasible)

        portfolio = optimize_portfolio(effort, 1.0)
        self.assertFalse(portfolio.feasible)
        self.assertEqual(portfolio.selected, ())
        self.assertEqual(portfolio.achieved_eci, 0.5)

    def test_single_candidate(self):
        effort = effort_of([('a', 2.0, 1.0)], [0.0])
        self.assertEqual(optimize_portfolio(effort, 0.25).activities, ('a',))

        unreachable = effort_of([('a', math.inf, 1.0)], [0.0])
        portfolio = optimize_portfolio(unreachable, 0.25)
        self.assertFalse(portfolio.feasible)
        self.assertEqual(portfolio.selected, ())

    def test_empty_baseline(self):
        effort = effort_of([('a', 1.0, 1.0)], [])
        with self.assertRaises(EmptySpecializationError):
            optimize_portfolio(effort, 0.5)

    def test_infeasible_is_max_achievable(self):
        """
        Out of reach targets return the selection with the highest ECI.
        """

        rng = np.random.default_rng(11)
        for _ in range(50):
            effort = random_effort(rng, int(rng.integers(0, 9)))
            portfolio = optimize_portfolio(effort, 100.0)
            self.assertFalse(portfolio.feasible)
            pool = selectable(effort)
            best = max(achieved_eci(effort, subset)
                       for k in range(len(pool) + 1)
                       for subset in itertools.combinations(pool, k))
            self.assertAlmostEqual(portfolio.achieved_eci, best, places=12)

    def test_inclusion_order(self):
        effort = effort_of([('a', 1.0, 1.0), ('b', 0.5, 1.0),
                            ('c', 0.0, 0.5)], [-2.25])
        portfolio = optimize_portfolio(effort, 0.0)
        # Free activities first, then by gain per unit of effort
        self.assertEqual(portfolio.activities, ('c', 'b', 'a'))
        cumulative = portfolio.cumulative_eci(effort)
        self.assertEqual(len(cumulative), 3)
        self.assertEqual(cumulative[-1], portfolio.achieved_eci)

    def test_matches_brute_force(self):
        """
        The branch and bound and the exhaustive enumeration agree on the
        selected set, its effort and its feasibility.
        """

        rng = np.random.default_rng(2024)
        for trial in range(1000):
            effort = random_effort(rng, int(rng.integers(0, 19)))
            target = effort.eci_baseline + float(rng.uniform(-0.1, 1.0))
            optimal = optimize_portfolio(effort, target)
            exhaustive = brute_force_portfolio(effort, target)
            with self.subTest(trial=trial):
                self.assertEqual(sorted(optimal.activities),
                                 sorted(exhaustive.activities))
                self.assertEqual(optimal.total_effort,
                                 exhaustive.total_effort)
                self.assertEqual(optimal.feasible, exhaustive.feasible)

    def test_monotone_in_target(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            effort = random_effort(rng, 14)
            targets = effort.eci_baseline + np.linspace(0.0, 1.5, 16)
            costs = []
            for target in targets:
                portfolio = optimize_portfolio(effort, float(target))
                if not portfolio.feasible:
                    break
                costs.append(portfolio.total_effort)
            self.assertEqual(costs, sorted(costs))

    def test_dominance(self):
        """
        A selected candidate is never chosen over one that is both cheaper
        and at least as complex.
        """

        rng = np.random.default_rng(8)
        for _ in range(200):
            effort = random_effort(rng, 12)
            portfolio = optimize_portfolio(
                effort, effort.eci_baseline + float(rng.uniform(0.0, 0.8)))
            chosen = set(portfolio.activities)
            for x in selectable(effort):
                for y in selectable(effort):
                    if y.activity in chosen and x.w < y.w \
                            and x.pci >= y.pci:
                        self.assertIn(x.activity, chosen)

    def test_not_worse_than_benchmark(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            effort = random_effort(rng, int(rng.integers(3, 25)))
            if len(selectable(effort)) < 2:
                continue
            target = effort.eci_baseline + float(rng.uniform(0.0, 1.0))
            benchmark = benchmark_portfolio(effort, target)
            optimal = optimize_portfolio(effort, target)
            if benchmark.feasible:
                self.assertTrue(optimal.feasible)
                self.assertLessEqual(
                    optimal.total_effort,
                    benchmark.total_effort * (1 + 1e-12) + 1e-12)


if __name__ == '__main__':
    unittest.main()
