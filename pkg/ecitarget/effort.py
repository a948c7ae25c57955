"""
Effort costs. Inverting the entry model gives, for each activity a location
isn't specialized in and isn't predicted to enter, the RCA that has to be
added at the steppingstone year for the model to predict RCA = 1 at the
horizon:

    log(R(t) + W + 1) = (log 2 - b0 - b2 r(t) - b3 w(t) - b4 w~(t)) / b1

The activities predicted to be specialized at the horizon with no effort
form the baseline of the location.
"""

import math
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from ecitarget import DataError, Regime
from ecitarget.complexity import (ComplexityScores, EmptySpecializationError,
                                  YearState)
from ecitarget.forecast import (SPECIALIZATION_THRESHOLD, FuturePrediction,
                                ModelMismatchError, SteppingstoneModel,
                                log_rca)
from ecitarget.ingest import OutputPanel


# Negative efforts closer to zero than this are rounding noise.
EFFORT_TOLERANCE = 1e-9

PRICINGS = ('future', 'current')


class EffortInversionError(DataError):
    """
    The entry model can't be inverted into efforts, or the inversion
    disagrees with the forecast.
    """


@dataclass(frozen=True)
class Candidate:
    """
    An activity that could be added to a location's portfolio. `w` is the
    effort in RCA units and `pci` the complexity used to price it. The RCA
    and relatedness at the base year are kept for the benchmark and the
    property analyses.
    """

    activity: str
    w: float
    pci: float
    rca: float = 0.0
    omega: float = 0.0
    omega_rel: float = 0.0


@dataclass(frozen=True, eq=False)
class EffortMatrix:
    """
    The candidates of a focal location, sorted by activity, and its
    baseline: the activities predicted to be specializations without any
    effort.
    """

    location: str
    candidates: Tuple[Candidate, ...]
    baseline: Tuple[str, ...]
    baseline_pci: Tuple[float, ...]
    year: Optional[int] = None
    pricing: str = 'future'

    def __post_init__(self) -> None:
        overlap = set(self.baseline) & {c.activity for c in self.candidates}
        if overlap:
            raise DataError(f"Activities both in the baseline and the"
                            f" candidates: {sorted(overlap)[:10]}")
        if any(c.w < 0 or math.isnan(c.w) for c in self.candidates):
            raise DataError("Efforts must be nonnegative")

    @classmethod
    def build(cls, location: str, candidates: Sequence[Candidate],
              baseline: Mapping[str, float], **kwargs) -> 'EffortMatrix':
        ids = sorted(baseline)
        return cls(location,
                   tuple(sorted(candidates, key=lambda c: c.activity)),
                   tuple(ids), tuple(float(baseline[p]) for p in ids),
                   **kwargs)

    @property
    def eci_baseline(self) -> float:
        if not self.baseline:
            raise EmptySpecializationError(f"{self.location} has an empty"
                                           " baseline")
        return math.fsum(self.baseline_pci) / len(self.baseline_pci)

    def candidate(self, activity: str) -> Candidate:
        for c in self.candidates:
            if c.activity == activity:
                return c
        raise KeyError(activity)


def compute_effort(location: str, model_entry: SteppingstoneModel,
                   model_exit: SteppingstoneModel, state: YearState,
                   prediction: FuturePrediction, pricing: str = 'future',
                   current_scores: Optional[ComplexityScores] = None
                   ) -> EffortMatrix:
    """
    Builds the effort matrix of a location. Activities are priced with the
    forecast PCI, or with the PCI at the base year when `pricing` is
    'current' (which needs `current_scores`). Activities without a price
    are left out.
    """

    if model_entry.regime is not Regime.ENTRY \
            or model_exit.regime is not Regime.EXIT:
        raise ModelMismatchError("compute_effort needs an entry and an exit"
                                 " model")
    if (prediction.delta_t, prediction.tau) != \
            (model_entry.delta_t, model_entry.tau) \
            or prediction.base_year != state.year:
        raise ModelMismatchError("The prediction wasn't built from these"
                                 " models and year")
    if not model_entry.b1 > 0:
        raise EffortInversionError(f"The entry model has b1 ="
                                   f" {model_entry.b1}, which can't be"
                                   " inverted")
    if pricing not in PRICINGS:
        raise ValueError(f"Unknown pricing {pricing}")

    snap = state.snapshot
    try:
        row = snap.locations.index(location)
    except ValueError:
        raise DataError(f"{location} isn't in the {snap.year} data")

    if pricing == 'future':
        pci = prediction.pci_future
    else:
        if current_scores is None:
            raise ValueError("Current pricing needs the base year scores")
        pci = current_scores.pci_of(snap.activities)

    rca = snap.rca[row]
    r = log_rca(rca)
    omega = state.relatedness.omega[row]
    omega_rel = state.relatedness.omega_rel[row]
    m_t = snap.m[row]
    m_pred = prediction.m_pred[row]

    b = model_entry
    exponent = (SPECIALIZATION_THRESHOLD - b.b0 - b.b2 * r - b.b3 * omega
                - b.b4 * omega_rel) / b.b1
    with np.errstate(over='ignore'):
        w = np.exp(exponent) - rca - 1.0

    candidates = []
    unpriced = 0
    for p, activity in enumerate(snap.activities):
        if m_t[p] or m_pred[p]:
            continue
        if w[p] < -EFFORT_TOLERANCE * (rca[p] + 1.0):
            raise EffortInversionError(
                f"{activity} isn't predicted for {location} but needs a"
                f" negative effort ({w[p]})")
        if np.isnan(pci[p]):
            unpriced += 1
            continue
        candidates.append(Candidate(activity, max(float(w[p]), 0.0),
                                    float(pci[p]), float(rca[p]),
                                    float(omega[p]), float(omega_rel[p])))

    baseline = {activity: float(pci[p])
                for p, activity in enumerate(snap.activities)
                if m_pred[p] and not np.isnan(pci[p])}
    if unpriced:
        logging.info("%d candidates of %s have no %s PCI and were left out",
                     unpriced, location, pricing)
    logging.info("%s has %d baseline activities and %d candidates",
                 location, len(baseline), len(candidates))

    return EffortMatrix.build(location, candidates, baseline,
                              year=snap.year, pricing=pricing)


def added_volume(activities: Sequence[str], location: str,
                 panel: OutputPanel, year: int) -> float:
    """
    The output a location would need to add to reach RCA = 1 in each
    activity, to first order: max(0, X_c X_p / X - X_cp) holding the year
    totals fixed.
    """

    matrix = panel.matrix(year)
    try:
        row = matrix.locations.index(location)
    except ValueError:
        raise DataError(f"{location} isn't in the {year} data")

    x = matrix.values
    loc_total = x[row].sum()
    total = x.sum()
    volume = []
    for activity in activities:
        try:
            col = matrix.activities.index(activity)
        except ValueError:
            raise DataError(f"{activity} isn't in the {year} data")
        needed = loc_total * x[:, col].sum() / total - x[row, col]
        volume.append(max(0.0, needed))

    return math.fsum(volume)
