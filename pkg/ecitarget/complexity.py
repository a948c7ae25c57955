"""
This module computes, for a single year slice, the revealed comparative
advantage (RCA) matrix, the binary specialization matrix, the economic and
product complexity indices, and the relatedness measures (proximity,
density and relative density).

ECI is the average complexity of the activities a location specializes
in, z-scored across locations. PCI comes from the eigenvector with the
second largest eigenvalue of the activity-space operator

    M~_pp' = sum_c M_cp M_cp' / (diversity_c ubiquity_p)

which is solved through its symmetric equivalent so that the dense
eigendecomposition is deterministic. The eigenvector ECI of the
location-space operator is kept as a cross-check.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import eigh
from scipy.sparse import bmat, csr_matrix
from scipy.sparse.csgraph import connected_components

from ecitarget import DataError, zscore
from ecitarget.ingest import OutputMatrix, OutputPanel


# The relatedness variant that feeds the forecast model. It's recorded in
# the outputs because other variants exist.
RELATEDNESS_VARIANT = "co-location proximity (minimum conditional" \
                      " probability)"

# Relative tolerance used to decide that two eigenvalues are the same.
EIGEN_TOLERANCE = 1e-10


class ZeroTotalError(DataError):
    """
    A location or activity has zero total output in the year slice, which
    usually means that the filters weren't applied.
    """


class DegenerateComplexityError(DataError):
    """
    The complexity indices aren't defined for the given matrix: zero
    variance, repeated eigenvalues or too few locations or activities.
    """


class EmptySpecializationError(DataError):
    """
    A location has no specializations, so its ECI is undefined.
    """


@dataclass(frozen=True, eq=False)
class SpecializationSnapshot:
    """
    The RCA matrix R and the binary matrix M (M = 1 where R >= 1) of a year,
    with the ids of their rows (locations) and columns (activities).
    """

    year: int
    locations: Tuple[str, ...]
    activities: Tuple[str, ...]
    rca: np.ndarray
    m: np.ndarray

    @classmethod
    def from_rca(cls, year: int, locations: Sequence[str],
                 activities: Sequence[str],
                 rca: np.ndarray) -> 'SpecializationSnapshot':
        rca = np.asarray(rca, dtype=float)
        return cls(year, tuple(locations), tuple(activities), rca,
                   (rca >= 1).astype(np.int8))

    @property
    def diversity(self) -> np.ndarray:
        return self.m.sum(axis=1)

    @property
    def ubiquity(self) -> np.ndarray:
        return self.m.sum(axis=0)


@dataclass(frozen=True, eq=False)
class ComplexityScores:
    """
    Standardized complexity indices. Only the locations and activities of
    the largest connected component of the location-activity graph get a
    score; the rest are listed in `dropped_locations` and
    `dropped_activities`.
    """

    locations: Tuple[str, ...]
    activities: Tuple[str, ...]
    eci: np.ndarray
    pci: np.ndarray
    eci_eigen: np.ndarray
    orientation_anchor: str
    standardization: Dict[str, Tuple[float, float]]
    dropped_locations: Tuple[str, ...] = ()
    dropped_activities: Tuple[str, ...] = ()

    def pci_of(self, activities: Sequence[str]) -> np.ndarray:
        """
        PCI aligned to the given activity ids, NaN for the ones without a
        score.
        """

        lookup = dict(zip(self.activities, self.pci))
        return np.array([lookup.get(p, np.nan) for p in activities])

    @property
    def eci_average(self) -> np.ndarray:
        """
        ECI before z-scoring: the plain average PCI of each location's
        specializations, in the same units as `eci_of_row`.
        """

        mean, std = self.standardization['eci']
        return self.eci * std + mean

    def eci_of(self, location: str) -> Optional[float]:
        try:
            return float(self.eci[self.locations.index(location)])
        except ValueError:
            return None


@dataclass(frozen=True, eq=False)
class RelatednessField:
    locations: Tuple[str, ...]
    activities: Tuple[str, ...]
    phi: np.ndarray
    omega: np.ndarray
    omega_rel: np.ndarray
    variant: str = RELATEDNESS_VARIANT


@dataclass(frozen=True, eq=False)
class YearState:
    """
    Everything computed for a year slice that the forecast model needs.
    """

    snapshot: SpecializationSnapshot
    relatedness: RelatednessField

    @property
    def year(self) -> int:
        return self.snapshot.year


def rca_from_matrix(matrix: OutputMatrix) -> SpecializationSnapshot:
    x = matrix.values
    loc_totals = x.sum(axis=1)
    act_totals = x.sum(axis=0)
    zero_locs = [c for c, t in zip(matrix.locations, loc_totals) if t <= 0]
    zero_acts = [p for p, t in zip(matrix.activities, act_totals) if t <= 0]
    if zero_locs or zero_acts:
        raise ZeroTotalError(
            f"Zero totals in {matrix.year} for locations {zero_locs[:10]}"
            f" and activities {zero_acts[:10]}")

    rca = x * x.sum() / np.outer(loc_totals, act_totals)
    return SpecializationSnapshot.from_rca(matrix.year, matrix.locations,
                                           matrix.activities, rca)


def compute_rca(panel: OutputPanel, year: int) -> SpecializationSnapshot:
    """
    R_cp = X_cp X / (X_c X_p) for the year slice of the panel.
    """

    return rca_from_matrix(panel.matrix(year))


def _largest_component(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row and column masks of the largest connected component of the
    bipartite location-activity graph defined by M.
    """

    n_locs, n_acts = m.shape
    adjacency = csr_matrix(m)
    graph = bmat([[None, adjacency], [adjacency.T, None]], format='csr')
    count, labels = connected_components(graph, directed=False)
    if count == 1:
        return np.ones(n_locs, dtype=bool), np.ones(n_acts, dtype=bool)

    sizes = np.bincount(labels)
    # np.argmax returns the first label among equally large components
    largest = int(np.argmax(sizes))
    logging.warning("The location-activity graph has %d components, using"
                    " the largest one (%d of %d nodes)", count,
                    sizes[largest], n_locs + n_acts)

    return labels[:n_locs] == largest, labels[n_locs:] == largest


def _second_eigenvector(sym: np.ndarray, scale: np.ndarray,
                        what: str) -> np.ndarray:
    """
    Eigenvector with the second largest eigenvalue of D^-1/2 S D^1/2-like
    operators, given the symmetric form `sym` and the diagonal `scale`
    (diversity or ubiquity) used to symmetrize it.
    """

    values, vectors = eigh(sym)
    top = max(1.0, abs(values[-1]))
    if values[-1] - values[-2] <= EIGEN_TOLERANCE * top:
        raise DegenerateComplexityError(f"The {what} operator has a repeated"
                                        " leading eigenvalue")
    if len(values) > 2 and values[-2] - values[-3] <= EIGEN_TOLERANCE * top:
        raise DegenerateComplexityError(f"The second eigenvalue of the"
                                        f" {what} operator isn't simple")

    return vectors[:, -2] / np.sqrt(scale)


def _correlation(a: np.ndarray, b: np.ndarray) -> float:
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def compute_eci_pci(m: np.ndarray,
                    locations: Optional[Sequence[str]] = None,
                    activities: Optional[Sequence[str]] = None
                    ) -> ComplexityScores:
    """
    Computes the standardized PCI and ECI of a binary specialization
    matrix without empty rows or columns.

    The sign of the eigenvector is arbitrary, so it's oriented to make the
    correlation between ECI and diversity nonnegative. When diversity is
    constant, PCI is oriented against ubiquity instead.
    """

    m = np.asarray(m, dtype=float)
    n_locs, n_acts = m.shape
    locations = tuple(locations) if locations is not None \
        else tuple(str(i) for i in range(n_locs))
    activities = tuple(activities) if activities is not None \
        else tuple(str(i) for i in range(n_acts))

    if (m.sum(axis=1) == 0).any() or (m.sum(axis=0) == 0).any():
        raise DataError("The specialization matrix has empty rows or"
                        " columns")

    row_mask, col_mask = _largest_component(m)
    kept_locs = tuple(c for c, keep in zip(locations, row_mask) if keep)
    kept_acts = tuple(p for p, keep in zip(activities, col_mask) if keep)
    m = m[np.ix_(row_mask, col_mask)]
    if len(kept_locs) < 2 or len(kept_acts) < 2:
        raise DegenerateComplexityError(
            "Complexity needs at least two connected locations and"
            " activities")

    diversity = m.sum(axis=1)
    ubiquity = m.sum(axis=0)
    # U^-1/2 M' D^-1 M U^-1/2 has the same spectrum as the activity
    # operator, and D^-1/2 M U^-1 M' D^-1/2 as the location one.
    act_sym = (m / np.sqrt(ubiquity)).T @ (m / np.sqrt(ubiquity)
                                          / diversity[:, None])
    act_sym = (act_sym + act_sym.T) / 2
    loc_sym = (m / np.sqrt(diversity)[:, None]) @ \
        (m / np.sqrt(diversity)[:, None] / ubiquity).T
    loc_sym = (loc_sym + loc_sym.T) / 2

    try:
        pci, pci_stats = zscore(
            _second_eigenvector(act_sym, ubiquity, "activity"), "PCI")
        eci, eci_stats = zscore(m @ pci / diversity, "ECI")
        eci_eigen, _ = zscore(
            _second_eigenvector(loc_sym, diversity, "location"),
            "eigenvector ECI")
    except DegenerateComplexityError:
        raise
    except DataError as e:
        raise DegenerateComplexityError(str(e))

    corr = _correlation(eci, diversity)
    if corr != 0:
        anchor = "corr(ECI, diversity) >= 0"
        flip = corr < 0
    else:
        anchor = "corr(PCI, ubiquity) <= 0"
        flip = _correlation(pci, ubiquity) > 0
    if flip:
        pci, eci = -pci, -eci
        pci_stats = (-pci_stats[0], pci_stats[1])
        eci_stats = (-eci_stats[0], eci_stats[1])

    # The cross-check is oriented the same way, falling back to the
    # average-based ECI when diversity can't decide.
    reference = diversity if np.std(diversity) > 0 else eci
    if _correlation(eci_eigen, reference) < 0:
        eci_eigen = -eci_eigen

    return ComplexityScores(
        locations=kept_locs,
        activities=kept_acts,
        eci=eci,
        pci=pci,
        eci_eigen=eci_eigen,
        orientation_anchor=anchor,
        standardization={'pci': pci_stats, 'eci': eci_stats},
        dropped_locations=tuple(c for c in locations if c not in
                                set(kept_locs)),
        dropped_activities=tuple(p for p in activities if p not in
                                 set(kept_acts)))


def eci_of_row(m_row: np.ndarray, pci: np.ndarray) -> float:
    """
    The average PCI of the activities selected by a binary row.
    """

    m_row = np.asarray(m_row, dtype=float)
    pci = np.asarray(pci, dtype=float)
    selected = m_row != 0
    if not selected.any():
        raise EmptySpecializationError("The row has no specializations")

    return math.fsum(m_row[selected] * pci[selected]) \
        / math.fsum(m_row[selected])


def compute_proximity(m: np.ndarray) -> np.ndarray:
    """
    phi_pp' = sum_c M_cp M_cp' / max(ubiquity_p, ubiquity_p'), the minimum
    of the two conditional probabilities of co-specialization.
    """

    m = np.asarray(m, dtype=float)
    ubiquity = m.sum(axis=0)
    if (ubiquity <= 0).any():
        raise DataError("Proximity needs every activity to have a positive"
                        " ubiquity")

    phi = (m.T @ m) / np.maximum.outer(ubiquity, ubiquity)
    np.fill_diagonal(phi, 1.0)
    return phi


def compute_density(m: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """
    omega_cp = sum_p' M_cp' phi_pp' / sum_p' phi_pp'.
    """

    m = np.asarray(m, dtype=float)
    totals = phi.sum(axis=1)
    if (totals <= 0).any():
        raise DataError("Density needs every proximity row to have a"
                        " positive sum")

    return np.clip((m @ phi.T) / totals[None, :], 0.0, 1.0)


def compute_relative_density(omega: np.ndarray) -> np.ndarray:
    return omega - omega.mean(axis=1, keepdims=True)


def relatedness_field(snapshot: SpecializationSnapshot) -> RelatednessField:
    phi = compute_proximity(snapshot.m)
    omega = compute_density(snapshot.m, phi)
    return RelatednessField(snapshot.locations, snapshot.activities, phi,
                            omega, compute_relative_density(omega))


def year_state(panel: OutputPanel, year: int) -> YearState:
    snapshot = compute_rca(panel, year)
    return YearState(snapshot, relatedness_field(snapshot))


def build_history(panel: OutputPanel,
                  years: Optional[Iterable[int]] = None
                  ) -> Dict[int, YearState]:
    """
    Computes the year state of every year in the panel (or of the given
    years), in ascending order.
    """

    years = sorted(panel.years if years is None else years)
    history = {}
    for year in years:
        history[year] = year_state(panel, year)
    logging.info("Computed RCA and relatedness for %d years (%d-%d)",
                 len(history), years[0], years[-1])

    return history


def write_rca_csv(snapshot: SpecializationSnapshot, path: str) -> None:
    locs, acts = np.meshgrid(np.arange(len(snapshot.locations)),
                             np.arange(len(snapshot.activities)),
                             indexing='ij')
    pd.DataFrame({
        'location': np.asarray(snapshot.locations)[locs.ravel()],
        'activity': np.asarray(snapshot.activities)[acts.ravel()],
        'rca': snapshot.rca.ravel()
    }).to_csv(path, index=False)


def write_complexity_csv(scores: ComplexityScores, path: str) -> None:
    pd.concat([
        pd.DataFrame({'kind': 'location', 'id': scores.locations,
                      'score': scores.eci}),
        pd.DataFrame({'kind': 'activity', 'id': scores.activities,
                      'score': scores.pci})
    ]).to_csv(path, index=False)


def write_proximity_csv(relatedness: RelatednessField, path: str) -> None:
    """
    Writes the upper triangle of the proximity matrix, without zeros.
    """

    rows, cols = np.triu_indices(len(relatedness.activities), k=1)
    values = relatedness.phi[rows, cols]
    keep = values > 0
    acts = np.asarray(relatedness.activities)
    pd.DataFrame({
        'activity': acts[rows[keep]],
        'other_activity': acts[cols[keep]],
        'phi': values[keep]
    }).to_csv(path, index=False)
