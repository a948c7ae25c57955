"""
Exhaustive selector, used to verify the optimal one on small instances.
Every subset of the candidates is enumerated in vectorized chunks; the
subsets that are close to the cheapest feasible one are then evaluated
canonically, so the tie-breaking matches the other selectors.

Check ecitarget/portfolio/generic.py for more information about the
selectors.
"""

import numpy as np

from ecitarget import DataError
from ecitarget.effort import EffortMatrix
from ecitarget.portfolio.generic import (Portfolio, SelectorBase,
                                         check_baseline, gain, is_feasible,
                                         make_portfolio, max_achievable,
                                         selectable, slack, subset_key)


ENUMERATION_LIMIT = 22
CHUNK_SIZE = 1 << 16


class EnumerationLimitError(DataError):
    """
    There are too many candidates to enumerate every subset.
    """


class BruteForceSelector(SelectorBase):
    METHOD_ID = 'brute_force'

    def select(self, effort: EffortMatrix, target: float) -> Portfolio:
        check_baseline(effort)
        if len(effort.candidates) > ENUMERATION_LIMIT:
            raise EnumerationLimitError(
                f"Can't enumerate the subsets of {len(effort.candidates)}"
                f" candidates (limit {ENUMERATION_LIMIT})")

        items = selectable(effort)
        n = len(items)
        costs = np.array([c.w for c in items], dtype=float)
        gains = np.array([gain(c, target) for c in items], dtype=float)
        base = slack(effort, (), target)
        tol = 1e-9 * (1.0 + abs(base) + np.abs(gains).sum())
        bits = np.arange(n, dtype=np.int64)

        best = None
        best_set = []
        for start in range(0, 1 << n, CHUNK_SIZE):
            codes = np.arange(start, min(start + CHUNK_SIZE, 1 << n),
                              dtype=np.int64)
            masks = ((codes[:, None] >> bits) & 1).astype(bool)
            approx_cost = masks @ costs
            approx_slack = base + masks @ gains

            near = np.nonzero(approx_slack >= -tol)[0]
            for row in near[np.argsort(approx_cost[near], kind='stable')]:
                if best is not None and approx_cost[row] > \
                        best[0] * (1 + 1e-9) + 1e-12:
                    break
                subset = [items[j] for j in np.nonzero(masks[row])[0]]
                if not is_feasible(effort, subset, target):
                    continue
                key = subset_key(subset)
                if best is None or key < best:
                    best, best_set = key, subset

        if best is None:
            return make_portfolio(effort, target, max_achievable(effort),
                                  self.METHOD_ID)

        return make_portfolio(effort, target, best_set, self.METHOD_ID)
