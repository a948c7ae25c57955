"""
Property panels comparing the portfolios suggested by each selection
method across locations: how specialized the locations already are in the
suggested activities, how related they are, how many there are and how
much output has to be added. Each series gets a quadratic fit against the
base year ECI.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np
import pandas as pd

from ecitarget import DataError
from ecitarget.portfolio.generic import Portfolio
from ecitarget.report import quadratic_fit


PANEL_COLUMNS = ('location', 'method', 'eci_t', 'diversity_t', 'target_eci',
                 'feasible', 'count', 'total_effort', 'mean_rca',
                 'mean_omega_rel', 'var_omega_rel', 'added_volume')

FITTED_SERIES = ('mean_rca', 'mean_omega_rel', 'var_omega_rel', 'count',
                 'added_volume')


@dataclass(frozen=True, eq=False)
class PropertyPanel:
    rows: pd.DataFrame
    fits: pd.DataFrame


def property_row(portfolio: Portfolio, eci_t: float, diversity_t: int,
                 volume: float) -> dict:
    """
    The panel row of a portfolio. The averages of an empty selection are
    NaN.
    """

    rca = np.array([c.rca for c in portfolio.selected], dtype=float)
    omega_rel = np.array([c.omega_rel for c in portfolio.selected],
                         dtype=float)
    empty = len(portfolio.selected) == 0

    return {
        'location': portfolio.location,
        'method': portfolio.method,
        'eci_t': eci_t,
        'diversity_t': diversity_t,
        'target_eci': portfolio.target_eci,
        'feasible': portfolio.feasible,
        'count': len(portfolio.selected),
        'total_effort': portfolio.total_effort,
        'mean_rca': np.nan if empty else float(rca.mean()),
        'mean_omega_rel': np.nan if empty else float(omega_rel.mean()),
        'var_omega_rel': np.nan if empty else float(omega_rel.var()),
        'added_volume': volume
    }


def unavailable_row(location: str, method: str, eci_t: float,
                    diversity_t: int, target_eci: float) -> dict:
    """
    The panel row of a method that couldn't build a portfolio, so that the
    location still shows up in the comparison.
    """

    return {
        'location': location,
        'method': method,
        'eci_t': eci_t,
        'diversity_t': diversity_t,
        'target_eci': target_eci,
        'feasible': False,
        'count': np.nan,
        'total_effort': np.nan,
        'mean_rca': np.nan,
        'mean_omega_rel': np.nan,
        'var_omega_rel': np.nan,
        'added_volume': np.nan
    }


def build_property_panel(records: Iterable[dict]) -> PropertyPanel:
    rows = pd.DataFrame.from_records(list(records),
                                     columns=list(PANEL_COLUMNS))
    rows = rows.sort_values(['location', 'method'],
                            kind='mergesort').reset_index(drop=True)

    fits: List[dict] = []
    for method in sorted(rows['method'].unique()):
        subset = rows[rows['method'] == method]
        for series in FITTED_SERIES:
            values = subset[['eci_t', series]].astype(float).dropna()
            try:
                c0, c1, c2 = quadratic_fit(values['eci_t'], values[series])
            except DataError as e:
                logging.warning("No quadratic fit of %s for %s: %s", series,
                                method, e)
                c0 = c1 = c2 = np.nan
            fits.append({'series': series, 'method': method, 'c0': c0,
                         'c1': c1, 'c2': c2, 'n': len(values)})

    return PropertyPanel(rows, pd.DataFrame.from_records(
        fits, columns=['series', 'method', 'c0', 'c1', 'c2', 'n']))


def method_means(panel: PropertyPanel, series: str) -> pd.Series:
    """
    Cross-location mean of a series for each method.
    """

    return panel.rows.groupby('method')[series].mean()


def write_property_panel(panel: PropertyPanel, rows_path: str,
                         fits_path: str) -> None:
    panel.rows.to_csv(rows_path, index=False)
    panel.fits.to_csv(fits_path, index=False)
