"""
The steppingstone forecast model. The log-RCA of a location in an activity
at the horizon t + delta_t is regressed on its value at the steppingstone
year t + tau, its value at t, and the relatedness and relative relatedness
at t:

    r(t + delta_t) = b0 + b1 r(t + tau) + b2 r(t) + b3 w(t) + b4 w~(t) + e

with r = log(RCA + 1). Two models are calibrated: one for the cells that
aren't a specialization at t (entry) and one for the ones that are (exit).
The estimates are averaged across every possible start year.
"""

import logging
from enum import Enum
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
from typing import (Dict, Iterable, Iterator, List, Mapping, Optional,
                    Sequence, Tuple)

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import stats

from ecitarget import ConfigError, DataError, Regime
from ecitarget.complexity import (ComplexityScores, YearState,
                                  compute_eci_pci, eci_of_row)
from ecitarget.ingest import MissingYearError


# Predicted log-RCA at or above this value means RCA >= 1.
SPECIALIZATION_THRESHOLD = float(np.log(2.0))

# Sample sizes above this use the normal approximation for p-values.
NORMAL_APPROX_MIN_OBS = 200

MIN_ROWS = 6

COEFFICIENTS = ('b0', 'b1', 'b2', 'b3', 'b4')


class Variant(Enum):
    """
    Regressor sets that can be calibrated: the full model, only the
    steppingstone terms, or only the relatedness terms.
    """

    FULL = 'full'
    STEPPINGSTONE = 'steppingstone'
    RELATEDNESS = 'relatedness'

    @property
    def columns(self) -> Tuple[int, ...]:
        return {
            Variant.FULL: (1, 2, 3, 4),
            Variant.STEPPINGSTONE: (1, 2),
            Variant.RELATEDNESS: (3, 4)
        }[self]


class RegressionError(DataError):
    """
    The regression can't be fitted: too few rows, an empty regime subset or
    a rank deficient design matrix.
    """


class ModelMismatchError(DataError):
    """
    Models that should be compatible (same regime, horizon and
    steppingstone) aren't.
    """


@dataclass(frozen=True)
class RegressionRow:
    location: str
    activity: str
    y: float
    x1: float
    x2: float
    x3: float
    x4: float
    regime: Regime
    start_year: int


@dataclass(frozen=True, eq=False)
class RowSet:
    """
    The rows of a regime for a start year, stored column-wise. `x` has the
    four regressors x1..x4 as columns. Rows are sorted by location and
    activity.
    """

    regime: Regime
    start_year: int
    tau: int
    delta_t: int
    locations: np.ndarray
    activities: np.ndarray
    y: np.ndarray
    x: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def __iter__(self) -> Iterator[RegressionRow]:
        for i in range(len(self)):
            yield RegressionRow(self.locations[i], self.activities[i],
                                float(self.y[i]), *map(float, self.x[i]),
                                self.regime, self.start_year)

    @classmethod
    def from_rows(cls, rows: Sequence[RegressionRow], tau: int,
                  delta_t: int) -> 'RowSet':
        rows = sorted(rows, key=lambda r: (r.location, r.activity))
        if not rows:
            raise RegressionError("No rows to build a row set from")
        return cls(
            regime=rows[0].regime,
            start_year=rows[0].start_year,
            tau=tau,
            delta_t=delta_t,
            locations=np.array([r.location for r in rows], dtype=object),
            activities=np.array([r.activity for r in rows], dtype=object),
            y=np.array([r.y for r in rows], dtype=float),
            x=np.array([[r.x1, r.x2, r.x3, r.x4] for r in rows],
                       dtype=float).reshape(len(rows), 4))


@dataclass(frozen=True)
class SteppingstoneModel:
    """
    A fitted (or averaged) forecast model. Coefficients excluded by the
    variant are NaN. `start_years` lists the start years whose fits were
    averaged, a single one for a plain fit.
    """

    regime: Regime
    delta_t: int
    tau: int
    variant: Variant
    coefficients: Tuple[float, ...]
    std_errors: Tuple[float, ...]
    p_values: Tuple[float, ...]
    r2: float
    adj_r2: float
    n_obs: int
    start_years: Tuple[int, ...]

    @property
    def b0(self) -> float:
        return self.coefficients[0]

    @property
    def b1(self) -> float:
        return self.coefficients[1]

    @property
    def b2(self) -> float:
        return self.coefficients[2]

    @property
    def b3(self) -> float:
        return self.coefficients[3]

    @property
    def b4(self) -> float:
        return self.coefficients[4]

    def predict(self, r_tau: np.ndarray, r_t: np.ndarray, omega: np.ndarray,
                omega_rel: np.ndarray) -> np.ndarray:
        if self.variant is not Variant.FULL:
            raise ModelMismatchError(f"Only full models can predict, got a"
                                     f" {self.variant.value} model")

        return self.b0 + self.b1 * r_tau + self.b2 * r_t + self.b3 * omega \
            + self.b4 * omega_rel


@dataclass(frozen=True)
class Calibration:
    """
    The model averaged over start years, along with the fit of each start
    year.
    """

    averaged: SteppingstoneModel
    per_year: Tuple[SteppingstoneModel, ...]


@dataclass(frozen=True, eq=False)
class FuturePrediction:
    """
    The forecast specialization of every location at the horizon, assuming
    no effort anywhere. Rows and columns follow the base year snapshot.
    `pci_future` is NaN for the activities nobody is predicted to
    specialize in.
    """

    base_year: int
    year: int
    delta_t: int
    tau: int
    locations: Tuple[str, ...]
    activities: Tuple[str, ...]
    r_hat: np.ndarray
    m_pred: np.ndarray
    scores: ComplexityScores
    pci_future: np.ndarray
    eci_pred: Dict[str, float]
    empty_locations: Tuple[str, ...] = ()


def _check_timing(tau: int, delta_t: int) -> None:
    if not 0 < tau < delta_t:
        raise ConfigError(f"The steppingstone must satisfy 0 < tau < delta_t"
                          f" (tau={tau}, delta_t={delta_t})")


def log_rca(rca: np.ndarray) -> np.ndarray:
    return np.log(np.asarray(rca, dtype=float) + 1.0)


def _state_of(history: Mapping[int, YearState], year: int) -> YearState:
    try:
        return history[year]
    except KeyError:
        raise MissingYearError(f"Year {year} isn't in the history")


def _align(state: YearState, locations: pd.Index,
           activities: pd.Index) -> Tuple[np.ndarray, ...]:
    snap = state.snapshot
    rows = pd.Index(snap.locations).get_indexer(locations)
    cols = pd.Index(snap.activities).get_indexer(activities)
    idx = np.ix_(rows, cols)
    rel = state.relatedness
    return snap.rca[idx], rel.omega[idx], rel.omega_rel[idx]


def assemble_rows(history: Mapping[int, YearState], t: int, tau: int,
                  delta_t: int, regime: Regime) -> RowSet:
    """
    Builds the regression rows of a regime for start year `t`, using the
    cells whose location and activity exist in the three years involved.
    Cells without output in a year have RCA zero.
    """

    _check_timing(tau, delta_t)
    base = _state_of(history, t)
    stone = _state_of(history, t + tau)
    horizon = _state_of(history, t + delta_t)

    locations = pd.Index(base.snapshot.locations)
    activities = pd.Index(base.snapshot.activities)
    for state in (stone, horizon):
        locations = locations.intersection(
            pd.Index(state.snapshot.locations), sort=True)
        activities = activities.intersection(
            pd.Index(state.snapshot.activities), sort=True)
    locations = locations.sort_values()
    activities = activities.sort_values()

    rca_t, omega, omega_rel = _align(base, locations, activities)
    rca_tau = _align(stone, locations, activities)[0]
    rca_dt = _align(horizon, locations, activities)[0]

    mask = rca_t < 1 if regime is Regime.ENTRY else rca_t >= 1
    if not mask.any():
        raise RegressionError(f"No {regime.value} rows for start year {t}")

    loc_idx, act_idx = np.nonzero(mask)
    x = np.column_stack((log_rca(rca_tau[mask]), log_rca(rca_t[mask]),
                         omega[mask], omega_rel[mask]))
    logging.debug("Assembled %d %s rows for %d (tau=%d, delta_t=%d)",
                  len(loc_idx), regime.value, t, tau, delta_t)

    return RowSet(regime, t, tau, delta_t,
                  np.asarray(locations, dtype=object)[loc_idx],
                  np.asarray(activities, dtype=object)[act_idx],
                  log_rca(rca_dt[mask]), x)


def fit_ols(rows: RowSet, variant: Variant = Variant.FULL
            ) -> SteppingstoneModel:
    """
    Ordinary least squares with an intercept and classical standard errors.
    """

    cols = variant.columns
    n = len(rows)
    k = len(cols) + 1
    if n < max(MIN_ROWS, k + 1):
        raise RegressionError(f"Too few rows to fit the model ({n})")

    design = np.column_stack([np.ones(n)] + [rows.x[:, c - 1]
                                             for c in cols])
    if np.linalg.matrix_rank(design) < k:
        raise RegressionError("The design matrix is rank deficient")
    if float(((rows.y - rows.y.mean()) ** 2).sum()) <= 0:
        raise RegressionError("The dependent variable is constant")

    result = sm.OLS(rows.y, design).fit()
    beta = np.asarray(result.params)
    se = np.asarray(result.bse)
    # Exact fits have zero standard errors
    with np.errstate(divide='ignore', invalid='ignore'):
        t_values = np.abs(np.asarray(result.tvalues))
    if n > NORMAL_APPROX_MIN_OBS:
        p = 2 * stats.norm.sf(t_values)
    else:
        p = 2 * stats.t.sf(t_values, result.df_resid)

    coefficients = np.full(5, np.nan)
    std_errors = np.full(5, np.nan)
    p_values = np.full(5, np.nan)
    for i, c in enumerate((0,) + cols):
        coefficients[c] = beta[i]
        std_errors[c] = se[i]
        p_values[c] = p[i]

    return SteppingstoneModel(
        regime=rows.regime,
        delta_t=rows.delta_t,
        tau=rows.tau,
        variant=variant,
        coefficients=tuple(float(b) for b in coefficients),
        std_errors=tuple(float(s) for s in std_errors),
        p_values=tuple(float(s) for s in p_values),
        r2=min(max(float(result.rsquared), 0.0), 1.0),
        adj_r2=float(result.rsquared_adj),
        n_obs=n,
        start_years=(rows.start_year,))


def average_models(models: Sequence[SteppingstoneModel]
                   ) -> SteppingstoneModel:
    """
    Unweighted coefficient-wise mean of models fitted on different start
    years. Standard errors and p-values are averaged too, only as a
    description of the individual fits.
    """

    if not models:
        raise RegressionError("No models to average")
    first = models[0]
    for model in models:
        if (model.regime, model.delta_t, model.tau, model.variant) != \
                (first.regime, first.delta_t, first.tau, first.variant):
            raise ModelMismatchError("Can't average models with different"
                                     " regimes, horizons, steppingstones or"
                                     " variants")

    models = sorted(models, key=lambda m: m.start_years)

    def mean(values: Iterable) -> Tuple[float, ...]:
        return tuple(float(v) for v in np.mean(np.array(list(values)),
                                               axis=0))

    return SteppingstoneModel(
        regime=first.regime,
        delta_t=first.delta_t,
        tau=first.tau,
        variant=first.variant,
        coefficients=mean(m.coefficients for m in models),
        std_errors=mean(m.std_errors for m in models),
        p_values=mean(m.p_values for m in models),
        r2=mean([m.r2] for m in models)[0],
        adj_r2=mean([m.adj_r2] for m in models)[0],
        n_obs=sum(m.n_obs for m in models),
        start_years=tuple(sorted(y for m in models for y in m.start_years)))


def start_years(years: Iterable[int], tau: int, delta_t: int) -> List[int]:
    """
    Every start year t with t + tau and t + delta_t also available.
    """

    years = set(years)
    return sorted(t for t in years
                  if t + tau in years and t + delta_t in years)


def calibrate(history: Mapping[int, YearState], regime: Regime, tau: int,
              delta_t: int, variant: Variant = Variant.FULL,
              workers: int = 1) -> Calibration:
    """
    Fits the model for every possible start year and averages the
    estimates. Start years without rows for the regime are skipped with a
    warning.
    """

    _check_timing(tau, delta_t)
    candidates = start_years(history.keys(), tau, delta_t)
    if not candidates:
        raise RegressionError(f"No start year has data for tau={tau} and"
                              f" delta_t={delta_t}")

    def fit(t: int) -> Optional[SteppingstoneModel]:
        try:
            return fit_ols(assemble_rows(history, t, tau, delta_t, regime),
                           variant)
        except RegressionError as e:
            logging.warning("Skipping start year %d: %s", t, e)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(fit, candidates))
    else:
        fits = [fit(t) for t in candidates]

    fits = [m for m in fits if m is not None]
    if not fits:
        raise RegressionError(f"No {regime.value} model could be fitted for"
                              f" tau={tau} and delta_t={delta_t}")
    averaged = average_models(fits)
    logging.info("Calibrated %s model (tau=%d, delta_t=%d) over %d start"
                 " years, R2=%.3f", regime.value, tau, delta_t, len(fits),
                 averaged.r2)

    return Calibration(averaged, tuple(fits))


def sweep(history: Mapping[int, YearState], tau_range: Iterable[int],
          delta_t_range: Iterable[int], variant: Variant = Variant.FULL,
          workers: int = 1) -> List[SteppingstoneModel]:
    """
    Averaged entry and exit models for every (delta_t, tau) pair with
    tau < delta_t and at least one start year.
    """

    models = []
    for delta_t in sorted(set(delta_t_range)):
        for tau in sorted(set(tau_range)):
            if not 0 < tau < delta_t \
                    or not start_years(history.keys(), tau, delta_t):
                continue
            for regime in Regime:
                try:
                    models.append(calibrate(history, regime, tau, delta_t,
                                            variant, workers).averaged)
                except RegressionError as e:
                    logging.warning("Sweep cell skipped: %s", e)

    if not models:
        raise RegressionError("The sweep has no feasible (delta_t, tau)"
                              " pair")

    return models


def _model_record(model: SteppingstoneModel, kind: str) -> dict:
    record = {
        'kind': kind,
        'regime': model.regime.value,
        'variant': model.variant.value,
        'delta_t': model.delta_t,
        'tau': model.tau
    }
    for i, name in enumerate(COEFFICIENTS):
        record[name] = model.coefficients[i]
    for i in range(5):
        record[f'se{i}'] = model.std_errors[i]
    for i in range(5):
        record[f'p{i}'] = model.p_values[i]
    record.update({
        'r2': model.r2,
        'adj_r2': model.adj_r2,
        'n_obs': model.n_obs,
        'start_years': ' '.join(str(y) for y in model.start_years)
    })

    return record


def write_models_csv(calibrations: Iterable[Calibration], path: str) -> None:
    """
    One row per averaged model followed by the single start year fits it
    was averaged from.
    """

    records = []
    for calibration in calibrations:
        records.append(_model_record(calibration.averaged, 'averaged'))
        records.extend(_model_record(m, 'start_year')
                       for m in calibration.per_year)
    pd.DataFrame.from_records(records).to_csv(path, index=False)


def write_sweep_csv(models: Iterable[SteppingstoneModel], path: str) -> None:
    records = []
    for model in models:
        key = {'delta_t': model.delta_t, 'tau': model.tau,
               'regime': model.regime.value}
        for i, name in enumerate(COEFFICIENTS):
            records.append(dict(key, coefficient=name,
                                estimate=model.coefficients[i],
                                se=model.std_errors[i],
                                p=model.p_values[i]))
        records.append(dict(key, coefficient='r2', estimate=model.r2,
                            se=np.nan, p=np.nan))

    pd.DataFrame.from_records(
        records, columns=['delta_t', 'tau', 'regime', 'coefficient',
                          'estimate', 'se', 'p']).to_csv(path, index=False)


def predict_future(model_entry: SteppingstoneModel,
                   model_exit: SteppingstoneModel,
                   state: YearState) -> FuturePrediction:
    """
    Forecasts the specialization matrix at t + delta_t with no effort, so
    the steppingstone term is r(t) itself. Each cell is scored by the model
    of its regime at t. The future PCI is computed from the predicted
    matrix of every location.
    """

    if model_entry.regime is not Regime.ENTRY \
            or model_exit.regime is not Regime.EXIT:
        raise ModelMismatchError("predict_future needs an entry and an exit"
                                 " model")
    if (model_entry.delta_t, model_entry.tau) != \
            (model_exit.delta_t, model_exit.tau):
        raise ModelMismatchError("The entry and exit models have different"
                                 " horizons or steppingstones")

    snap = state.snapshot
    rel = state.relatedness
    r = log_rca(snap.rca)
    entry = snap.rca < 1
    r_hat = np.where(
        entry,
        model_entry.predict(r, r, rel.omega, rel.omega_rel),
        model_exit.predict(r, r, rel.omega, rel.omega_rel))
    m_pred = (r_hat >= SPECIALIZATION_THRESHOLD).astype(np.int8)

    rows = m_pred.sum(axis=1) > 0
    cols = m_pred.sum(axis=0) > 0
    empty = tuple(c for c, keep in zip(snap.locations, rows) if not keep)
    if empty:
        logging.warning("No predicted specializations for %s, excluded from"
                        " the predicted ECI", ', '.join(empty))

    locations = tuple(c for c, keep in zip(snap.locations, rows) if keep)
    activities = tuple(p for p, keep in zip(snap.activities, cols) if keep)
    scores = compute_eci_pci(m_pred[np.ix_(rows, cols)], locations,
                             activities)
    pci_future = scores.pci_of(snap.activities)

    eci_pred = {}
    for i, location in enumerate(snap.locations):
        if location not in scores.locations:
            continue
        row = m_pred[i].astype(float)
        known = ~np.isnan(pci_future)
        eci_pred[location] = eci_of_row(row[known], pci_future[known])

    horizon = snap.year + model_entry.delta_t
    logging.info("Predicted specializations for %d with %d of %d"
                 " activities scored", horizon, len(scores.activities),
                 len(snap.activities))

    return FuturePrediction(
        base_year=snap.year,
        year=horizon,
        delta_t=model_entry.delta_t,
        tau=model_entry.tau,
        locations=snap.locations,
        activities=snap.activities,
        r_hat=r_hat,
        m_pred=m_pred,
        scores=scores,
        pci_future=pci_future,
        eci_pred=eci_pred,
        empty_locations=empty)
