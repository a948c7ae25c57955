"""
Generic implementation of a portfolio selector, and the evaluation shared
by all of them. Every selector must judge subsets with the functions in
this module so that their results can be compared exactly.

The ECI constraint

    (sum_{B u S} pci) / (|B| + |S|) >= target

is evaluated in its linear form

    sum_{B u S} (pci - target) >= 0

where B is the baseline and S the selected candidates. Both forms are
decided with exact rational arithmetic over the float PCIs, so they always
agree, and a feasible subset's rounded average is never below the target.
"""

import math
from fractions import Fraction
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

from ecitarget.complexity import EmptySpecializationError
from ecitarget.effort import Candidate, EffortMatrix


# Key used to compare feasible subsets: total effort, then number of
# activities, then their sorted ids.
SubsetKey = Tuple[float, int, Tuple[str, ...]]


@dataclass(frozen=True)
class Portfolio:
    """
    The activities selected for a location, in inclusion order.
    `achieved_eci` is the average PCI of the baseline plus the selection.
    """

    location: str
    target_eci: float
    eci_baseline: float
    selected: Tuple[Candidate, ...]
    achieved_eci: float
    total_effort: float
    feasible: bool
    method: str

    @property
    def activities(self) -> Tuple[str, ...]:
        return tuple(c.activity for c in self.selected)

    def cumulative_eci(self, effort: EffortMatrix) -> List[float]:
        """
        The ECI after including each selected activity in order.
        """

        return [achieved_eci(effort, self.selected[:i])
                for i in range(1, len(self.selected) + 1)]


def gain(candidate: Candidate, target: float) -> float:
    return candidate.pci - target


def selectable(effort: EffortMatrix) -> List[Candidate]:
    """
    Candidates that can be chosen at all; infinite efforts never are.
    """

    return [c for c in effort.candidates if math.isfinite(c.w)]


def check_baseline(effort: EffortMatrix) -> None:
    if not effort.baseline:
        raise EmptySpecializationError(f"{effort.location} has no baseline"
                                       " activities to build on")


def _exact_sum(effort: EffortMatrix,
               chosen: Iterable[Candidate]) -> Tuple[Fraction, int]:
    values = list(effort.baseline_pci) + [c.pci for c in chosen]
    return sum(map(Fraction, values), Fraction(0)), len(values)


def exact_slack(effort: EffortMatrix, chosen: Iterable[Candidate],
                target: float) -> Fraction:
    total, n = _exact_sum(effort, chosen)
    return total - n * Fraction(target)


def slack(effort: EffortMatrix, chosen: Iterable[Candidate],
          target: float) -> float:
    return float(exact_slack(effort, chosen, target))


def is_feasible(effort: EffortMatrix, chosen: Iterable[Candidate],
                target: float) -> bool:
    return exact_slack(effort, chosen, target) >= 0


def ratio_feasible(effort: EffortMatrix, chosen: Iterable[Candidate],
                   target: float) -> bool:
    """
    The ECI constraint in its original ratio form.
    """

    total, n = _exact_sum(effort, chosen)
    return total / n >= Fraction(target)


def achieved_eci(effort: EffortMatrix, chosen: Iterable[Candidate]) -> float:
    """
    The average PCI of the baseline plus `chosen`, correctly rounded.
    """

    total, n = _exact_sum(effort, chosen)
    return float(total / n)


def subset_key(chosen: Sequence[Candidate]) -> SubsetKey:
    return (math.fsum(c.w for c in chosen), len(chosen),
            tuple(sorted(c.activity for c in chosen)))


def inclusion_order(chosen: Iterable[Candidate],
                    target: float) -> Tuple[Candidate, ...]:
    """
    Orders a selection by gain per unit of effort, the most efficient
    first. Free activities go first and ties are broken by id.
    """

    def ratio(c: Candidate) -> float:
        g = gain(c, target)
        return math.inf if c.w == 0 else g / c.w

    return tuple(sorted(chosen, key=lambda c: (-ratio(c), c.activity)))


def max_achievable(effort: EffortMatrix) -> List[Candidate]:
    """
    The selection with the highest possible ECI: candidates are added by
    decreasing PCI while they raise the average.
    """

    values = list(effort.baseline_pci)
    chosen = []
    for c in sorted(selectable(effort),
                    key=lambda c: (-c.pci, c.w, c.activity)):
        if c.pci <= math.fsum(values) / len(values):
            break
        chosen.append(c)
        values.append(c.pci)

    return chosen


def make_portfolio(effort: EffortMatrix, target: float,
                   chosen: Sequence[Candidate], method: str,
                   ordered: bool = False) -> Portfolio:
    """
    Builds the portfolio of a selection, evaluating it canonically. The
    selection keeps its order when `ordered` is set, and is sorted with
    `inclusion_order` otherwise.
    """

    selected = tuple(chosen) if ordered else inclusion_order(chosen, target)
    return Portfolio(
        location=effort.location,
        target_eci=target,
        eci_baseline=effort.eci_baseline,
        selected=selected,
        achieved_eci=achieved_eci(effort, selected),
        total_effort=math.fsum(c.w for c in selected),
        feasible=is_feasible(effort, selected, target),
        method=method)


class SelectorBase(metaclass=ABCMeta):
    """
    The abstract base class used for any portfolio selector.

    Other notes:
        * The selector's module should have an entry in the list of methods
        in ecitarget.portfolio (the __init__.py file).
        * Selectors must evaluate subsets with the functions in this module.
    """

    METHOD_ID = ''

    @abstractmethod
    def select(self, effort: EffortMatrix, target: float) -> Portfolio:
        """
        Chooses the candidates to add to the baseline of `effort` so that
        its ECI reaches `target`. If that's not possible, the returned
        portfolio has `feasible` set to False.

        The baseline must be nonempty.
        """
