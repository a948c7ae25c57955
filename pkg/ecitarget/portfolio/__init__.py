"""
This init module lists the available portfolio selection methods and how
to initialize them.
"""

import importlib
from dataclasses import dataclass

from ecitarget import BaseModuleData, find_module
from ecitarget.effort import EffortMatrix
from ecitarget.portfolio.generic import Portfolio, SelectorBase


@dataclass(frozen=True)
class MethodData(BaseModuleData):
    """
    Information structure about the different selection methods, with a
    description for the user and how to initialize it.
    """

    # Whether the method is included in the property analyses.
    compared: bool


METHODS = (
    MethodData(
        id='optimal',
        short_name='ECI optimization',
        description='Minimum total effort reaching the target ECI, solved'
        ' exactly with branch and bound.',
        module='ecitarget.portfolio.optimal',
        class_name='OptimalSelector',
        compared=True),

    MethodData(
        id='benchmark',
        short_name='Relatedness-complexity',
        description='Activities ranked by normalized relatedness times'
        ' normalized PCI until the target ECI is reached.',
        module='ecitarget.portfolio.benchmark',
        class_name='BenchmarkSelector',
        compared=True),

    MethodData(
        id='brute_force',
        short_name='Brute force',
        description='Exhaustive enumeration of every subset, only for small'
        ' candidate pools.',
        module='ecitarget.portfolio.brute_force',
        class_name='BruteForceSelector',
        compared=False)
)


def initialize_method(method: MethodData) -> SelectorBase:
    """
    Choosing a method from the list and initializing its selector with the
    information inside the `method` object.
    """

    mod = importlib.import_module(method.module)
    cls = getattr(mod, method.class_name)

    return cls()


def select_portfolio(method_id: str, effort: EffortMatrix,
                     target_eci: float) -> Portfolio:
    return initialize_method(find_module(METHODS, method_id)).select(
        effort, target_eci)


def optimize_portfolio(effort: EffortMatrix, target_eci: float) -> Portfolio:
    return select_portfolio('optimal', effort, target_eci)


def brute_force_portfolio(effort: EffortMatrix,
                          target_eci: float) -> Portfolio:
    return select_portfolio('brute_force', effort, target_eci)


def benchmark_portfolio(effort: EffortMatrix,
                        target_eci: float) -> Portfolio:
    return select_portfolio('benchmark', effort, target_eci)
