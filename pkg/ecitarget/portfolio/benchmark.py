"""
Relatedness-complexity benchmark. Candidates are scored with the product of
their min-max normalized relatedness and PCI, and added in order of score
until the target ECI is reached. It mimics picking activities from the
upper right corner of a relatedness-complexity diagram.

Check ecitarget/portfolio/generic.py for more information about the
selectors.
"""

import logging

import numpy as np

from ecitarget import DataError
from ecitarget.effort import EffortMatrix
from ecitarget.portfolio.generic import (Portfolio, SelectorBase,
                                         check_baseline, is_feasible,
                                         make_portfolio, selectable)


def _normalize(values: np.ndarray) -> np.ndarray:
    return (values - values.min()) / (values.max() - values.min())


def benchmark_scores(omega: np.ndarray, pci: np.ndarray) -> np.ndarray:
    """
    normalized(omega) * normalized(pci). A constant factor can't be
    normalized, so only the other one is used; if both are constant the
    ranking is undefined.
    """

    omega = np.asarray(omega, dtype=float)
    pci = np.asarray(pci, dtype=float)
    if len(omega) < 2:
        raise DataError("The benchmark needs at least two candidates")

    flat_omega = omega.max() == omega.min()
    flat_pci = pci.max() == pci.min()
    if flat_omega and flat_pci:
        raise DataError("Both relatedness and PCI are constant across the"
                        " candidates")
    if flat_omega:
        logging.warning("Relatedness is constant, ranking by PCI only")
        return _normalize(pci)
    if flat_pci:
        logging.warning("PCI is constant, ranking by relatedness only")
        return _normalize(omega)

    return _normalize(omega) * _normalize(pci)


class BenchmarkSelector(SelectorBase):
    METHOD_ID = 'benchmark'

    def select(self, effort: EffortMatrix, target: float) -> Portfolio:
        check_baseline(effort)
        if is_feasible(effort, (), target):
            return make_portfolio(effort, target, (), self.METHOD_ID,
                                  ordered=True)

        pool = selectable(effort)
        scores = benchmark_scores([c.omega for c in pool],
                                  [c.pci for c in pool])
        ranking = sorted(range(len(pool)),
                         key=lambda i: (-scores[i], pool[i].activity))

        chosen = []
        for i in ranking:
            chosen.append(pool[i])
            if is_feasible(effort, chosen, target):
                break

        return make_portfolio(effort, target, chosen, self.METHOD_ID,
                              ordered=True)
