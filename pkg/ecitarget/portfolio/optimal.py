"""
Exact minimum-effort selector. The problem is a covering knapsack: choose
candidates with gains g = pci - target and costs w so that the gains cover
the baseline deficit at minimum cost. It's solved with a depth-first
branch and bound over the candidates sorted by g / w, bounded with the
fractional (LP) relaxation.

Check ecitarget/portfolio/generic.py for more information about the
selectors.
"""

import bisect
import logging
import math
from typing import List, Optional, Tuple

from ecitarget.effort import Candidate, EffortMatrix
from ecitarget.portfolio.generic import (Portfolio, SelectorBase, SubsetKey,
                                         check_baseline, gain,
                                         inclusion_order, is_feasible,
                                         make_portfolio, max_achievable,
                                         selectable, slack, subset_key)


# Relative slack on the pruning bound, so that solutions tied with the
# incumbent are still explored.
BOUND_TOLERANCE = 1e-12


class OptimalSelector(SelectorBase):
    METHOD_ID = 'optimal'

    def select(self, effort: EffortMatrix, target: float) -> Portfolio:
        check_baseline(effort)
        if is_feasible(effort, (), target):
            return make_portfolio(effort, target, (), self.METHOD_ID)

        # Candidates that don't raise the ECI above the target can't help
        items = [c for c in selectable(effort) if gain(c, target) > 0]
        if not is_feasible(effort, items, target):
            logging.info("Target %.4f is out of reach for %s", target,
                         effort.location)
            return make_portfolio(effort, target, max_achievable(effort),
                                  self.METHOD_ID)

        chosen = self._branch_and_bound(effort, target, items)
        return make_portfolio(effort, target, chosen, self.METHOD_ID)

    def _branch_and_bound(self, effort: EffortMatrix, target: float,
                          items: List[Candidate]) -> List[Candidate]:
        items = list(inclusion_order(items, target))
        n = len(items)
        gains = [gain(c, target) for c in items]
        costs = [c.w for c in items]
        # prefix[k] is the sum of the first k gains (or costs)
        gain_prefix = [0.0]
        cost_prefix = [0.0]
        for g, w in zip(gains, costs):
            gain_prefix.append(gain_prefix[-1] + g)
            cost_prefix.append(cost_prefix[-1] + w)

        need = -slack(effort, (), target)
        tol = 1e-12 * (1.0 + abs(need) + gain_prefix[-1])

        def bound(i: int, cost: float, residual: float) -> Optional[float]:
            """
            The cost of covering `residual` with fractions of the items from
            i on, or None if they can't cover it.
            """

            if residual <= 0:
                return cost
            wanted = gain_prefix[i] + residual
            k = bisect.bisect_left(gain_prefix, wanted, lo=i)
            if k > n:
                if gain_prefix[n] - gain_prefix[i] < residual - tol:
                    return None
                k = n
            last = k - 1
            partial = residual - (gain_prefix[last] - gain_prefix[i])
            return cost + (cost_prefix[last] - cost_prefix[i]) \
                + max(partial, 0.0) * costs[last] / gains[last]

        best: Optional[SubsetKey] = None
        best_set: Tuple[int, ...] = ()
        nodes = 0
        # Each node is (next item, cost, covered gain, chosen item indices)
        stack = [(0, 0.0, 0.0, ())]
        while stack:
            i, cost, covered, chosen = stack.pop()
            nodes += 1
            residual = need - covered

            if residual <= tol:
                subset = [items[j] for j in chosen]
                if is_feasible(effort, subset, target):
                    key = subset_key(subset)
                    if best is None or key < best:
                        best, best_set = key, chosen
                    # Supersets cost at least as much with more activities
                    continue

            if i == n:
                continue
            lower = bound(i, cost, residual)
            if lower is None:
                continue
            if best is not None and \
                    lower > best[0] * (1 + BOUND_TOLERANCE) + BOUND_TOLERANCE:
                continue

            stack.append((i + 1, cost, covered, chosen))
            stack.append((i + 1, cost + costs[i], covered + gains[i],
                          chosen + (i,)))

        logging.info("Branch and bound for %s explored %d nodes over %d"
                     " candidates", effort.location, nodes, n)

        return [items[j] for j in best_set]
