"""
Growth model linking complexity to the annualized 10-year growth of GDP per
capita:

    g_ct = a1 ECI_ct + a2 z_ct + a3 ECI_ct z_ct + gamma_t + u_ct

where z is the z-scored log of the initial GDP per capita within each
period's sample and gamma_t are period effects, which absorb the
intercept. Standard errors are heteroskedasticity robust (HC1).

The model can be used forwards, to predict the growth that a predicted ECI
supports, or backwards, to find the ECI a target growth rate needs.
"""

import math
import logging
from enum import Enum
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import statsmodels.api as sm

from ecitarget import DataError, zscore
from ecitarget.complexity import ComplexityScores
from ecitarget.ingest import MacroSeries, MissingYearError


SLOPE_EPSILON = 1e-6

TERMS = ('eci', 'z', 'eci_z')


class GrowthVariant(Enum):
    SOLOW = 'solow'
    ECI = 'eci'
    FULL = 'full'

    @property
    def terms(self) -> Tuple[str, ...]:
        return {
            GrowthVariant.SOLOW: ('z',),
            GrowthVariant.ECI: ('eci', 'z'),
            GrowthVariant.FULL: TERMS
        }[self]


class GrowthModelError(DataError):
    """
    The growth model can't be fitted or used with the given data.
    """


class SingularSlopeError(GrowthModelError):
    """
    Growth doesn't depend on ECI at the given initial income
    (a1 + a3 z is about zero), so a target can't be inverted.
    """


@dataclass(frozen=True, eq=False)
class GrowthPanel:
    """
    One row per (location, period) with the columns location, period,
    start, end, eci, gdp_start, gdp_end, log_gdp, z and growth (percent per
    year). `normalization` has the (mean, std) of log GDP per capita used
    for the z-scores of each start year.
    """

    rows: pd.DataFrame
    normalization: Dict[int, Tuple[float, float]]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class GrowthModel:
    variant: GrowthVariant
    coefficients: Dict[str, float]
    std_errors: Dict[str, float]
    p_values: Dict[str, float]
    period_effects: Dict[str, float]
    period_std_errors: Dict[str, float]
    r2: float
    adj_r2: float
    resid_std: float
    f_stat: float
    n_obs: int
    normalization: Dict[int, Tuple[float, float]]
    sample: Tuple[Tuple[str, str], ...]

    def _coef(self, term: str) -> float:
        value = self.coefficients.get(term, math.nan)
        return 0.0 if math.isnan(value) else value

    @property
    def a1(self) -> float:
        return self._coef('eci')

    @property
    def a2(self) -> float:
        return self._coef('z')

    @property
    def a3(self) -> float:
        return self._coef('eci_z')

    @property
    def latest_period(self) -> str:
        return max(self.period_effects, key=lambda p: int(p.split('-')[0]))

    def effect(self, period: Optional[str] = None) -> float:
        period = self.latest_period if period is None else period
        try:
            return self.period_effects[period]
        except KeyError:
            raise GrowthModelError(f"No fitted effect for period {period}")


def period_label(start: int, end: int) -> str:
    return f"{start}-{end}"


def annualized_growth(gdp_start: np.ndarray, gdp_end: np.ndarray,
                      years: int) -> np.ndarray:
    """
    Log-difference growth in percent per year.
    """

    return 100.0 / years * np.log(np.asarray(gdp_end, dtype=float)
                                  / np.asarray(gdp_start, dtype=float))


def assemble_growth_panel(macro: MacroSeries,
                          eci_history: Mapping[int, ComplexityScores],
                          periods: Sequence[Tuple[int, int]]
                          ) -> GrowthPanel:
    """
    Builds the growth rows of the locations with an ECI at the start of
    each period and GDP per capita at both of its ends. The ECI is the
    average PCI of each location's specializations.
    """

    gdp = macro.rows.set_index(['location', 'year'])['gdp_pc_ppp']
    frames = []
    normalization = {}
    for start, end in periods:
        if end <= start:
            raise GrowthModelError(f"Invalid period {start}-{end}")
        try:
            scores = eci_history[start]
        except KeyError:
            raise MissingYearError(f"No ECI available for {start}")

        locations = list(scores.locations)
        frame = pd.DataFrame({
            'location': locations,
            'period': period_label(start, end),
            'start': start,
            'end': end,
            'eci': scores.eci_average,
            'gdp_start': gdp.reindex(pd.MultiIndex.from_arrays(
                [locations, [start] * len(locations)])).to_numpy(),
            'gdp_end': gdp.reindex(pd.MultiIndex.from_arrays(
                [locations, [end] * len(locations)])).to_numpy()
        }).dropna(subset=['gdp_start', 'gdp_end'])
        if len(frame) < 2:
            raise GrowthModelError(f"Fewer than two locations with data for"
                                   f" {period_label(start, end)}")

        frame['log_gdp'] = np.log(frame['gdp_start'])
        frame['z'], normalization[start] = zscore(
            frame['log_gdp'].to_numpy(), "log GDP per capita")
        frame['growth'] = annualized_growth(frame['gdp_start'],
                                            frame['gdp_end'], end - start)
        frames.append(frame)
        logging.info("Growth period %s has %d locations",
                     period_label(start, end), len(frame))

    rows = pd.concat(frames).sort_values(['start', 'location'],
                                         kind='mergesort')
    return GrowthPanel(rows.reset_index(drop=True), normalization)


def _design(rows: pd.DataFrame, variant: GrowthVariant,
            periods: Sequence[str]) -> pd.DataFrame:
    columns = {
        'eci': rows['eci'],
        'z': rows['z'],
        'eci_z': rows['eci'] * rows['z']
    }
    design = pd.DataFrame({t: columns[t] for t in variant.terms})
    for period in periods:
        design[period] = (rows['period'] == period).astype(float)

    return design


def fit_growth_model(panel: GrowthPanel,
                     variant: GrowthVariant = GrowthVariant.FULL
                     ) -> GrowthModel:
    """
    OLS with one effect per period and no separate constant. With a single
    period its effect is just the intercept.
    """

    rows = panel.rows
    periods = sorted(rows['period'].unique(),
                     key=lambda p: int(p.split('-')[0]))
    if len(periods) == 1:
        logging.warning("The growth panel has a single period, its effect"
                        " is a plain intercept")

    design = _design(rows, variant, periods)
    n, k = design.shape
    if n <= max(4, k):
        raise GrowthModelError(f"Too few observations ({n}) for the growth"
                               " model")
    if np.linalg.matrix_rank(design.to_numpy()) < k:
        raise GrowthModelError("The growth design matrix is rank deficient")

    y = rows['growth'].to_numpy(dtype=float)
    result = sm.OLS(y, design).fit(cov_type='HC1')

    resid = y - design.to_numpy() @ result.params.to_numpy()
    ssr = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    dof = n - k
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof
    f_stat = ((sst - ssr) / (k - 1)) / (ssr / dof) \
        if k > 1 and ssr > 0 else math.nan

    def by_term(values: pd.Series) -> Dict[str, float]:
        return {t: float(values[t]) if t in variant.terms else math.nan
                for t in TERMS}

    model = GrowthModel(
        variant=variant,
        coefficients=by_term(result.params),
        std_errors=by_term(result.bse),
        p_values=by_term(result.pvalues),
        period_effects={p: float(result.params[p]) for p in periods},
        period_std_errors={p: float(result.bse[p]) for p in periods},
        r2=r2,
        adj_r2=adj_r2,
        resid_std=math.sqrt(ssr / dof),
        f_stat=f_stat,
        n_obs=n,
        normalization=dict(panel.normalization),
        sample=tuple(zip(rows['location'], rows['period'])))
    logging.info("Fitted %s growth model on %d observations, R2=%.3f",
                 variant.value, n, r2)

    return model


def predict_growth(model: GrowthModel, eci: float, z: float,
                   period: Optional[str] = None) -> float:
    """
    The growth rate (percent per year) supported by an ECI at a given
    normalized initial income, keeping the effect of the latest period
    unless told otherwise.
    """

    return model.a1 * eci + model.a2 * z + model.a3 * eci * z \
        + model.effect(period)


def invert_target_eci(model: GrowthModel, target_growth: float, z: float,
                      period: Optional[str] = None,
                      epsilon: float = SLOPE_EPSILON) -> float:
    """
    The ECI needed for `target_growth` percent per year.
    """

    slope = model.a1 + model.a3 * z
    if abs(slope) <= epsilon:
        raise SingularSlopeError(f"The growth slope on ECI is {slope} at"
                                 f" z = {z}, the target can't be inverted")

    return (target_growth - model.a2 * z - model.effect(period)) / slope


def location_z(model: GrowthModel, gdp_pc: float) -> float:
    """
    Normalizes a GDP per capita with the stats of the latest start year.
    """

    if not gdp_pc > 0:
        raise GrowthModelError(f"Invalid GDP per capita {gdp_pc}")
    mean, std = model.normalization[max(model.normalization)]

    return (math.log(gdp_pc) - mean) / std


def write_growth_csv(model: GrowthModel, path: str) -> None:
    records = []
    for term in TERMS:
        records.append({'section': 'coefficient', 'name': term,
                        'estimate': model.coefficients[term],
                        'robust_se': model.std_errors[term],
                        'p': model.p_values[term]})
    for period, effect in model.period_effects.items():
        records.append({'section': 'period_effect', 'name': period,
                        'period': period, 'estimate': effect,
                        'robust_se': model.period_std_errors[period]})
    for name in ('r2', 'adj_r2', 'resid_std', 'f_stat', 'n_obs'):
        records.append({'section': 'statistic', 'name': name,
                        'estimate': getattr(model, name)})
    for location, period in model.sample:
        records.append({'section': 'sample', 'name': location,
                        'period': period})

    pd.DataFrame.from_records(
        records, columns=['section', 'name', 'period', 'estimate',
                          'robust_se', 'p']).to_csv(path, index=False)
