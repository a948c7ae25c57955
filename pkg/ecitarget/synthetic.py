"""
Deterministic synthetic data with the shape of the trade inputs, used to
run the whole pipeline at desk scale.

Each location has a capability that drifts over time and each activity a
complexity. A location is more likely to produce an activity the more its
capability exceeds the activity's complexity, with noise that persists
from year to year. GDP per capita grows faster for capable locations with
low income, so the growth model has something to find.
"""

import os
from typing import Tuple

import numpy as np
import pandas as pd


def synthetic_frames(n_locations: int = 30, n_activities: int = 200,
                     first_year: int = 1998, last_year: int = 2022,
                     seed: int = 0) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Returns a trade panel (country_id, product_hs4, year, export_value) and
    a macro series (country_id, year, gdp_pc_ppp_const2021, population)
    with the CSV column names.
    """

    rng = np.random.default_rng(seed)
    years = np.arange(first_year, last_year + 1)
    n_years = len(years)

    capability = np.sort(rng.normal(0.0, 1.0, n_locations))
    drift = rng.normal(0.0, 0.4, n_locations)
    complexity = rng.normal(0.0, 1.0, n_activities)
    scale = rng.normal(0.0, 0.8, n_activities)

    # AR(1) noise of every (location, activity) cell
    rho = 0.8
    noise = np.empty((n_locations, n_activities, n_years))
    noise[..., 0] = rng.normal(0.0, 1.0, (n_locations, n_activities))
    for t in range(1, n_years):
        noise[..., t] = rho * noise[..., t - 1] + np.sqrt(1 - rho ** 2) \
            * rng.normal(0.0, 1.0, (n_locations, n_activities))

    trend = (years - first_year) / max(n_years - 1, 1)
    level = capability[:, None] + drift[:, None] * trend[None, :]
    gap = level[:, None, :] - complexity[None, :, None]
    presence = 1 / (1 + np.exp(-(2.5 * gap + 0.7 * noise)))
    present = rng.random(presence.shape) < presence

    values = 1e8 * np.exp(0.6 * gap + 0.5 * noise + scale[None, :, None])
    values = np.where(present, np.round(values, 2), 0.0)

    loc_ids = np.array([f"L{i:02d}" for i in range(n_locations)])
    act_ids = np.array([f"{1000 + p:04d}" for p in range(n_activities)])
    c, p, t = np.nonzero(values)
    panel = pd.DataFrame({
        'country_id': loc_ids[c],
        'product_hs4': act_ids[p],
        'year': years[t],
        'export_value': values[c, p, t]
    })

    log_gdp = np.empty((n_locations, n_years))
    log_gdp[:, 0] = 8.5 + 0.8 * capability \
        + rng.normal(0.0, 0.3, n_locations)
    for t in range(1, n_years):
        income = (log_gdp[:, t - 1] - log_gdp[:, t - 1].mean()) \
            / log_gdp[:, t - 1].std()
        rate = 0.02 + 0.01 * level[:, t - 1] - 0.006 * income \
            + rng.normal(0.0, 0.01, n_locations)
        log_gdp[:, t] = log_gdp[:, t - 1] + rate
    population = np.exp(rng.uniform(np.log(2e6), np.log(2e8), n_locations))

    macro = pd.DataFrame({
        'country_id': np.repeat(loc_ids, n_years),
        'year': np.tile(years, n_locations),
        'gdp_pc_ppp_const2021': np.round(np.exp(log_gdp).ravel(), 2),
        'population': np.round(np.repeat(population, n_years))
    })

    return panel, macro


def write_synthetic(directory: str, seed: int = 0) -> Tuple[str, str]:
    """
    Writes the synthetic panel and macro CSVs to `directory`, returning
    their paths.
    """

    os.makedirs(directory, exist_ok=True)
    panel, macro = synthetic_frames(seed=seed)
    panel_path = os.path.join(directory, 'trade.csv')
    macro_path = os.path.join(directory, 'macro.csv')
    panel.to_csv(panel_path, index=False)
    macro.to_csv(macro_path, index=False)

    return panel_path, macro_path
