"""
This module loads the location x activity x year output panels (exports by
country and product, or payroll by metropolitan area and industry), smooths
them with a moving average, filters out small locations and activities, and
persists them in a versioned text format.

The auxiliary GDP per capita and population series used by the filters and
the growth model are loaded here too.

Panels are immutable once built: every operation returns a new panel with
its provenance updated.
"""

import io
import hashlib
import logging
from functools import cached_property
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from ecitarget import Provenance, DataError


PANEL_FORMAT = 'ecitarget-panel'
PANEL_FORMAT_VERSION = 1
PANEL_COLUMNS = ('location', 'activity', 'year', 'value')
MACRO_COLUMNS = ('country_id', 'year', 'gdp_pc_ppp_const2021', 'population')


@dataclass(frozen=True)
class SchemaData:
    """
    Information about each supported input dataset: the CSV header it must
    have, and the default filter thresholds that go with it.
    """

    id: str
    description: str
    columns: Tuple[str, str, str, str]
    min_location_total: float
    min_population: Optional[float]
    min_activity_total: float


SCHEMAS = (
    SchemaData(
        id='trade',
        description="Exports by country and HS4 product, in current USD.",
        columns=('country_id', 'product_hs4', 'year', 'export_value'),
        min_location_total=1e9,
        min_population=1e6,
        min_activity_total=5e5),

    SchemaData(
        id='payroll',
        description="Payroll by metropolitan area and NAICS industry, in"
                    " USD.",
        columns=('msa_id', 'naics', 'year', 'payroll'),
        min_location_total=1e5,
        min_population=None,
        min_activity_total=1.5e5)
)


def find_schema(schema_id: str) -> SchemaData:
    for schema in SCHEMAS:
        if schema.id == schema_id:
            return schema

    raise DataError(f"Unknown schema '{schema_id}', expected one of"
                    f" {', '.join(s.id for s in SCHEMAS)}")


class PanelFormatError(DataError):
    """
    A CSV or panel file couldn't be parsed. The row-indexed problems found
    are available in `diagnostics` as (line number, message) pairs.
    """

    def __init__(self, message: str,
                 diagnostics: Sequence[Tuple[int, str]] = ()) -> None:
        self.diagnostics = list(diagnostics)
        if self.diagnostics:
            shown = '; '.join(f"line {line}: {msg}"
                              for line, msg in self.diagnostics[:5])
            if len(self.diagnostics) > 5:
                shown += f" (and {len(self.diagnostics) - 5} more)"
            message = f"{message}: {shown}"
        super().__init__(message)


class PanelIntegrityError(DataError):
    """
    A saved panel is truncated or its checksum doesn't match its contents.
    """


class PanelVersionError(DataError):
    """
    A saved panel was written with a different version of the format.
    """


class MissingYearError(DataError):
    """
    A year needed by an operation isn't available.
    """


@dataclass(frozen=True)
class FilterRules:
    """
    Thresholds used to drop small locations and activities from each year.
    A location is kept when its total output exceeds `min_location_total`
    and, if there's a population rule, when its population exceeds
    `min_population`. An activity is kept when its total output is at least
    `min_activity_total`.
    """

    min_location_total: float = 0.0
    min_population: Optional[float] = None
    min_activity_total: float = 0.0

    @classmethod
    def for_schema(cls, schema_id: str) -> 'FilterRules':
        schema = find_schema(schema_id)
        return cls(min_location_total=schema.min_location_total,
                   min_population=schema.min_population,
                   min_activity_total=schema.min_activity_total)


@dataclass(frozen=True, eq=False)
class OutputMatrix:
    """
    The dense output matrix X_cp of a single year, with the location and
    activity ids of its rows and columns.
    """

    year: int
    locations: Tuple[str, ...]
    activities: Tuple[str, ...]
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class OutputPanel:
    """
    Sparse location x activity x year panel of nonnegative output values.
    `entries` is kept sorted by location, activity and year, and the year
    range is stored as metadata because some years may have no rows at all.
    """

    entries: pd.DataFrame
    first_year: int
    last_year: int
    provenance: Provenance
    smoothing_window: Optional[int] = None

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, provenance: Provenance,
                   years: Optional[Tuple[int, int]] = None,
                   smoothing_window: Optional[int] = None) -> 'OutputPanel':
        """
        Builds a panel out of a frame with the columns in PANEL_COLUMNS,
        checking its invariants. The year range defaults to the one spanned
        by the rows.
        """

        frame = pd.DataFrame({
            'location': frame['location'].astype(str),
            'activity': frame['activity'].astype(str),
            'year': frame['year'].astype(np.int64),
            'value': frame['value'].astype(float)
        })

        if years is None:
            if frame.empty:
                raise DataError("The year range of an empty panel must be"
                                " given explicitly")
            years = (int(frame['year'].min()), int(frame['year'].max()))
        first, last = years
        if first > last:
            raise DataError(f"Invalid year range {first}-{last}")

        values = frame['value'].to_numpy()
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DataError("Panel values must be finite and nonnegative")
        if frame['year'].lt(first).any() or frame['year'].gt(last).any():
            raise DataError(f"Panel rows fall outside {first}-{last}")
        if frame.duplicated(['location', 'activity', 'year']).any():
            raise DataError("Panel has duplicate (location, activity, year)"
                            " keys")

        frame = frame.sort_values(['location', 'activity', 'year'],
                                  kind='mergesort').reset_index(drop=True)
        return cls(frame, first, last, provenance, smoothing_window)

    @cached_property
    def locations(self) -> Tuple[str, ...]:
        return tuple(sorted(self.entries['location'].unique()))

    @cached_property
    def activities(self) -> Tuple[str, ...]:
        return tuple(sorted(self.entries['activity'].unique()))

    @property
    def years(self) -> range:
        return range(self.first_year, self.last_year + 1)

    def __len__(self) -> int:
        return len(self.entries)

    def matrix(self, year: int) -> OutputMatrix:
        """
        Returns the dense output matrix for a year. Its rows and columns are
        the locations and activities with at least one entry that year, and
        absent cells are zero.
        """

        rows = self.entries[self.entries['year'] == year]
        if rows.empty:
            raise MissingYearError(f"The panel has no data for {year}")

        wide = rows.pivot(index='location', columns='activity',
                          values='value').fillna(0.0)
        wide = wide.sort_index(axis=0).sort_index(axis=1)
        return OutputMatrix(year, tuple(wide.index), tuple(wide.columns),
                            wide.to_numpy(dtype=float))

    def year_totals(self) -> pd.Series:
        return self.entries.groupby('year')['value'].sum()


@dataclass(frozen=True, eq=False)
class MacroSeries:
    """
    GDP per capita (PPP, constant 2021 USD) and population by location and
    year. Missing values are NaN.
    """

    rows: pd.DataFrame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'MacroSeries':
        frame = pd.DataFrame({
            'location': frame['location'].astype(str),
            'year': frame['year'].astype(np.int64),
            'gdp_pc_ppp': frame['gdp_pc_ppp'].astype(float),
            'population': frame['population'].astype(float)
        })
        if frame.duplicated(['location', 'year']).any():
            raise DataError("Macro series has duplicate (location, year)"
                            " keys")
        for col in ('gdp_pc_ppp', 'population'):
            present = frame[col].dropna()
            if (present <= 0).any() or not np.all(np.isfinite(present)):
                raise DataError(f"Macro series has nonpositive {col}")

        frame = frame.sort_values(['location', 'year'],
                                  kind='mergesort').reset_index(drop=True)
        return cls(frame)

    def _lookup(self, column: str) -> pd.Series:
        return self.rows.set_index(['location', 'year'])[column]

    def population_of(self, locations: Sequence[str],
                      year: int) -> np.ndarray:
        """
        Population of each location in a year. Raises a DataError naming the
        missing pairs if any of them isn't available.
        """

        series = self._lookup('population')
        keys = pd.MultiIndex.from_arrays([list(locations),
                                          [year] * len(locations)])
        values = series.reindex(keys).to_numpy(dtype=float)
        missing = [loc for loc, v in zip(locations, values) if np.isnan(v)]
        if missing:
            raise DataError(f"Population missing in {year} for"
                            f" {', '.join(missing[:10])}")

        return values

    def gdp_pc(self, location: str, year: int) -> Optional[float]:
        series = self._lookup('gdp_pc_ppp')
        try:
            value = float(series.loc[(location, year)])
        except KeyError:
            return None

        return None if np.isnan(value) else value

    def latest_gdp_pc(self, location: str,
                      up_to: int) -> Optional[Tuple[int, float]]:
        """
        The latest available (year, GDP per capita) pair of a location not
        after `up_to`.
        """

        rows = self.rows[(self.rows['location'] == location)
                         & (self.rows['year'] <= up_to)].dropna(
                             subset=['gdp_pc_ppp'])
        if rows.empty:
            return None
        last = rows.iloc[-1]
        return int(last['year']), float(last['gdp_pc_ppp'])


def _read_csv(path: str, columns: Tuple[str, ...]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise PanelFormatError(f"{path} is empty")

    header = tuple(c.strip() for c in frame.columns)
    if header != columns:
        raise PanelFormatError(f"{path}: the header {','.join(header)}"
                               f" doesn't match {','.join(columns)}")
    if frame.empty:
        raise PanelFormatError(f"{path} has a header but no rows")

    frame.columns = list(columns)
    return frame.apply(lambda col: col.str.strip())


def _collect(diagnostics: List[Tuple[int, str]], mask: pd.Series,
             message: str) -> None:
    # CSV line numbers: the header is line 1.
    for idx in np.flatnonzero(mask.to_numpy()):
        diagnostics.append((int(idx) + 2, message))


def load_panel_csv(path: str, schema: str) -> OutputPanel:
    """
    Loads a trade or payroll CSV into a raw panel. Every malformed row is
    reported with its line number, and rows with missing or negative values
    are rejected rather than skipped.
    """

    data = find_schema(schema)
    loc_col, act_col, year_col, value_col = data.columns
    frame = _read_csv(path, data.columns)

    years = pd.to_numeric(frame[year_col], errors='coerce')
    values = pd.to_numeric(frame[value_col], errors='coerce')

    diagnostics = []
    _collect(diagnostics, frame[loc_col] == '', f"missing {loc_col}")
    _collect(diagnostics, frame[act_col] == '', f"missing {act_col}")
    _collect(diagnostics, years.isna() | (years != np.floor(years)),
             f"invalid {year_col}")
    _collect(diagnostics, values.isna(), f"missing or invalid {value_col}")
    _collect(diagnostics, values.notna() & ~np.isfinite(values.fillna(0)),
             f"non-finite {value_col}")
    _collect(diagnostics, values < 0, f"negative {value_col}")
    if diagnostics:
        raise PanelFormatError(f"Malformed rows in {path}",
                               sorted(diagnostics))

    keys = [loc_col, act_col, year_col]
    dups = frame.assign(**{year_col: years}).duplicated(keys, keep='first')
    if dups.any():
        diagnostics = []
        _collect(diagnostics, dups, "duplicate (location, activity, year)")
        raise PanelFormatError(f"Duplicate keys in {path}", diagnostics)

    panel = OutputPanel.from_frame(pd.DataFrame({
        'location': frame[loc_col],
        'activity': frame[act_col],
        'year': years.astype(np.int64),
        'value': values.astype(float)
    }), Provenance.RAW)
    logging.info("Loaded %d rows from %s (%d locations, %d activities,"
                 " %d-%d)", len(panel), path, len(panel.locations),
                 len(panel.activities), panel.first_year, panel.last_year)

    return panel


def load_macro_csv(path: str) -> MacroSeries:
    """
    Loads the GDP per capita and population series. Empty cells are allowed
    and read as missing values.
    """

    frame = _read_csv(path, MACRO_COLUMNS)
    years = pd.to_numeric(frame['year'], errors='coerce')
    gdp = pd.to_numeric(frame['gdp_pc_ppp_const2021'].replace('', np.nan),
                        errors='coerce')
    pop = pd.to_numeric(frame['population'].replace('', np.nan),
                        errors='coerce')

    diagnostics = []
    _collect(diagnostics, frame['country_id'] == '', "missing country_id")
    _collect(diagnostics, years.isna() | (years != np.floor(years)),
             "invalid year")
    _collect(diagnostics, (frame['gdp_pc_ppp_const2021'] != '') & gdp.isna(),
             "invalid gdp_pc_ppp_const2021")
    _collect(diagnostics, gdp <= 0, "nonpositive gdp_pc_ppp_const2021")
    _collect(diagnostics, (frame['population'] != '') & pop.isna(),
             "invalid population")
    _collect(diagnostics, pop <= 0, "nonpositive population")
    if diagnostics:
        raise PanelFormatError(f"Malformed rows in {path}",
                               sorted(diagnostics))

    dups = frame.assign(year=years).duplicated(['country_id', 'year'])
    if dups.any():
        diagnostics = []
        _collect(diagnostics, dups, "duplicate (country_id, year)")
        raise PanelFormatError(f"Duplicate keys in {path}", diagnostics)

    return MacroSeries.from_frame(pd.DataFrame({
        'location': frame['country_id'],
        'year': years.astype(np.int64),
        'gdp_pc_ppp': gdp,
        'population': pop
    }))


def smooth_moving_average(panel: OutputPanel, window: int) -> OutputPanel:
    """
    Replaces every value with the mean of the raw values over the `window`
    years ending on it, counting absent cells as zero. Only the years with a
    full window are kept, so a 4-year window over 1998-2022 yields
    2001-2022.
    """

    if window < 1:
        raise ValueError(f"The smoothing window must be positive, not"
                         f" {window}")
    if panel.provenance != Provenance.RAW:
        raise DataError(f"Only raw panels can be smoothed, this one is"
                        f" {panel.provenance.value}")
    span = panel.last_year - panel.first_year + 1
    if window > span:
        raise DataError(f"The smoothing window ({window}) is larger than the"
                        f" {span} years available")

    out_years = (panel.first_year + window - 1, panel.last_year)
    if len(panel) == 0:
        return OutputPanel.from_frame(panel.entries, Provenance.SMOOTHED,
                                      out_years, window)

    years = list(panel.years)
    wide = panel.entries.pivot(index=['location', 'activity'],
                               columns='year', values='value')
    wide = wide.reindex(columns=years)
    present = wide.notna().to_numpy()
    values = wide.fillna(0.0).to_numpy(dtype=float)

    means = sliding_window_view(values, window, axis=1).mean(axis=-1)
    seen = sliding_window_view(present, window, axis=1).any(axis=-1)
    rows, cols = np.nonzero(seen)

    smoothed = pd.DataFrame({
        'location': wide.index.get_level_values(0)[rows],
        'activity': wide.index.get_level_values(1)[rows],
        'year': np.asarray(years[window - 1:], dtype=np.int64)[cols],
        'value': means[rows, cols]
    })
    logging.info("Smoothed %d raw rows into %d rows with a %d-year window"
                 " (%d-%d)", len(panel), len(smoothed), window, *out_years)

    return OutputPanel.from_frame(smoothed, Provenance.SMOOTHED, out_years,
                                  window)


def _filter_year(frame: pd.DataFrame, year: int,
                 macro: Optional[MacroSeries],
                 rules: FilterRules) -> pd.DataFrame:
    if macro is not None and rules.min_population is not None:
        locations = frame['location'].unique()
        population = macro.population_of(list(locations), year)
        allowed = locations[population > rules.min_population]
        frame = frame[frame['location'].isin(allowed)]

    # Dropping activities lowers location totals and vice versa, so both
    # passes are repeated until nothing changes.
    while True:
        loc_totals = frame.groupby('location')['value'].sum()
        locations = loc_totals.index[loc_totals > rules.min_location_total]
        kept = frame[frame['location'].isin(locations)]
        act_totals = kept.groupby('activity')['value'].sum()
        activities = act_totals.index[
            (act_totals >= rules.min_activity_total) & (act_totals > 0)]
        kept = kept[kept['activity'].isin(activities)]
        if len(kept) == len(frame):
            return kept
        frame = kept


def apply_filters(panel: OutputPanel, macro: Optional[MacroSeries],
                  rules: FilterRules) -> OutputPanel:
    """
    Drops, for each year separately, the locations below the output and
    population thresholds and the activities below the output threshold. A
    location may pass in one year and fail in another.

    The population rule is only applied when a macro series is given.
    """

    if panel.provenance not in (Provenance.SMOOTHED, Provenance.FILTERED):
        raise DataError("Filters are applied to smoothed panels, this one is"
                        f" {panel.provenance.value}")

    kept = [_filter_year(frame, year, macro, rules)
            for year, frame in panel.entries.groupby('year', sort=True)]
    filtered = pd.concat(kept) if kept else panel.entries
    logging.info("Filtering kept %d of %d rows", len(filtered), len(panel))

    return OutputPanel.from_frame(filtered, Provenance.FILTERED,
                                  (panel.first_year, panel.last_year),
                                  panel.smoothing_window)


def _serialize(panel: OutputPanel) -> str:
    entries = panel.entries
    for col in ('location', 'activity'):
        if entries[col].str.contains('[\t\n\r]', regex=True).any():
            raise DataError(f"Ids with tabs or newlines can't be saved"
                            f" ({col})")

    window = '' if panel.smoothing_window is None \
        else str(panel.smoothing_window)
    header = [
        f"#{PANEL_FORMAT}\t{PANEL_FORMAT_VERSION}",
        f"#provenance\t{panel.provenance.value}",
        f"#smoothing_window\t{window}",
        f"#years\t{panel.first_year}\t{panel.last_year}",
        f"#entries\t{len(entries)}",
        '\t'.join(PANEL_COLUMNS)
    ]
    # repr() of a Python float is the shortest string that reads back to
    # the same value.
    rows = (entries['location'] + '\t' + entries['activity'] + '\t'
            + entries['year'].astype(str) + '\t'
            + entries['value'].map(lambda v: repr(float(v))))

    return '\n'.join(header + rows.tolist()) + '\n'


def save_panel(panel: OutputPanel, path: str) -> None:
    """
    Writes the panel sorted by location, activity and year, followed by a
    SHA-256 trailer of everything above it.
    """

    body = _serialize(panel)
    digest = hashlib.sha256(body.encode('utf-8')).hexdigest()
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(body)
        f.write(f"#sha256\t{digest}\n")


def load_saved_panel(path: str) -> OutputPanel:
    with open(path, encoding='utf-8', newline='') as f:
        text = f.read()

    first_line = text.split('\n', 1)[0].split('\t')
    if len(first_line) != 2 or first_line[0] != f"#{PANEL_FORMAT}":
        raise PanelIntegrityError(f"{path} isn't a saved panel")
    if first_line[1] != str(PANEL_FORMAT_VERSION):
        raise PanelVersionError(f"{path} uses version {first_line[1]} of"
                                f" the panel format, expected"
                                f" {PANEL_FORMAT_VERSION}")

    trailer_at = text.rfind('#sha256\t')
    if trailer_at == -1 or not text.endswith('\n'):
        raise PanelIntegrityError(f"{path} is truncated")
    body = text[:trailer_at]
    digest = text[trailer_at + len('#sha256\t'):].strip()
    if hashlib.sha256(body.encode('utf-8')).hexdigest() != digest:
        raise PanelIntegrityError(f"{path} doesn't match its checksum")

    lines = body.split('\n')
    try:
        meta = {line.split('\t')[0][1:]: line.split('\t')[1:]
                for line in lines[1:5]}
        provenance = Provenance(meta['provenance'][0])
        window = int(meta['smoothing_window'][0]) \
            if meta['smoothing_window'][0] != '' else None
        years = (int(meta['years'][0]), int(meta['years'][1]))
        count = int(meta['entries'][0])
    except (KeyError, IndexError, ValueError) as e:
        raise PanelIntegrityError(f"{path} has a malformed header: {e}")

    frame = pd.read_csv(io.StringIO('\n'.join(lines[5:])), sep='\t',
                        dtype={'location': str, 'activity': str},
                        keep_default_na=False, float_precision='round_trip')
    if len(frame) != count:
        raise PanelIntegrityError(f"{path} declares {count} entries but has"
                                  f" {len(frame)}")

    return OutputPanel.from_frame(frame, provenance, years, window)
