"""
Orchestration of a run. The `Pipeline` computes its stages lazily, in the
order they depend on each other:

    panel -> history -> models -> prediction -> growth -> efforts
          -> portfolios -> property panel

and every command only writes the outputs it's asked for. Errors raised
inside a stage are wrapped in a PipelineError naming it.

Outputs go to the configured directory, with one subdirectory per focal
location, and a `run_manifest.json` with the hashes of the inputs and
outputs. Nothing in them depends on the time or the output directory, so
a rerun with the same inputs produces the same bytes.
"""

import os
import re
import json
import hashlib
import logging
import dataclasses
from contextlib import contextmanager
from functools import cached_property
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ecitarget import (ConfigError, DataError, EciTargetError, PipelineError,
                       Regime)
from ecitarget.config import RunConfig
from ecitarget.complexity import (RELATEDNESS_VARIANT, ComplexityScores,
                                  YearState, build_history,
                                  compute_eci_pci, compute_rca,
                                  write_complexity_csv, write_proximity_csv,
                                  write_rca_csv)
from ecitarget.effort import EffortMatrix, added_volume, compute_effort
from ecitarget.forecast import (Calibration, FuturePrediction, Variant,
                                calibrate, predict_future, sweep,
                                write_models_csv, write_sweep_csv)
from ecitarget.growth import (GrowthModel, GrowthVariant,
                              assemble_growth_panel, fit_growth_model,
                              invert_target_eci, location_z, predict_growth,
                              write_growth_csv)
from ecitarget.ingest import (MacroSeries, OutputPanel, FilterRules,
                              apply_filters, load_macro_csv, load_panel_csv,
                              save_panel, smooth_moving_average)
from ecitarget.portfolio import METHODS, Portfolio, select_portfolio
from ecitarget.report.diagram import (diagram_rows, emit_diagram_svg,
                                      write_diagram_csv)
from ecitarget.report.properties import (PropertyPanel, build_property_panel,
                                         property_row, unavailable_row,
                                         write_property_panel)
from ecitarget.version import __version__


MANIFEST = 'run_manifest.json'

MANIFEST_PACKAGES = ('numpy', 'scipy', 'pandas', 'statsmodels',
                     'matplotlib')


@contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except PipelineError:
        raise
    except EciTargetError as e:
        raise PipelineError(name, e) from e
    except OSError as e:
        raise PipelineError(name, DataError(str(e))) from e


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)

    return digest.hexdigest()


def safe_name(location: str) -> str:
    return re.sub(r'[^A-Za-z0-9_.-]', '_', location)


def sequential_targets(effort: EffortMatrix, targets: Sequence[float],
                       to_eci: Callable[[float], float] = float
                       ) -> pd.DataFrame:
    """
    Runs the optimizer for each of the ascending `targets` and annotates
    every activity with the first target at which it's selected. `to_eci`
    converts a target to ECI when it's given in another unit. Activities
    that are never selected are left out.
    """

    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("The targets must be strictly ascending")

    records = []
    seen = set()
    for target in targets:
        target_eci = to_eci(target)
        portfolio = select_portfolio('optimal', effort, target_eci)
        for c in portfolio.selected:
            if c.activity in seen:
                continue
            seen.add(c.activity)
            records.append({'activity': c.activity, 'first_target': target,
                            'target_eci': target_eci, 'w': c.w,
                            'pci': c.pci, 'feasible': portfolio.feasible})

    return pd.DataFrame.from_records(
        records, columns=['activity', 'first_target', 'target_eci', 'w',
                          'pci', 'feasible'])


def delta_target(scores: ComplexityScores, location: str,
                 delta: float) -> float:
    """
    The target ECI of a location `delta` standard deviations above its ECI
    at the base year, in the average PCI units of the portfolios.
    """

    try:
        i = scores.locations.index(location)
    except ValueError:
        raise DataError(f"{location} has no ECI at the base year") from None

    return float(scores.eci_average[i]) \
        + delta * scores.standardization['eci'][1]


class Pipeline:
    """
    The stages of a run. Each stage is computed once, when it's first
    needed.
    """

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.outputs: List[str] = []
        # Set when the target is out of reach for some focal location
        self.infeasible = False
        self._portfolios: Dict[Tuple[str, str], Optional[Portfolio]] = {}
        os.makedirs(config.output_dir, exist_ok=True)

    def path(self, *parts: str) -> str:
        """
        Path of an output, relative to the output directory. Its directory
        is created and the output registered for the manifest.
        """

        rel = os.path.join(*parts)
        full = os.path.join(self.config.output_dir, rel)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        if rel not in self.outputs:
            self.outputs.append(rel)

        return full

    # Stages

    @cached_property
    def macro(self) -> Optional[MacroSeries]:
        if self.config.macro is None:
            return None
        with stage('ingest'):
            return load_macro_csv(self.config.macro)

    @cached_property
    def raw_panel(self) -> OutputPanel:
        if self.config.panel is None:
            raise ConfigError("No panel CSV was given")
        with stage('ingest'):
            return load_panel_csv(self.config.panel, self.config.schema)

    def _rules(self) -> FilterRules:
        rules = self.config.filters
        if self.macro is None and rules.min_population is not None:
            logging.info("No macro series, the population filter is"
                         " skipped")
            rules = dataclasses.replace(rules, min_population=None)
        return rules

    @cached_property
    def panel(self) -> OutputPanel:
        with stage('ingest'):
            smoothed = smooth_moving_average(self.raw_panel,
                                             self.config.window)
            return apply_filters(smoothed, self.macro, self._rules())

    @cached_property
    def history(self) -> Dict[int, YearState]:
        with stage('complexity'):
            return build_history(self.panel)

    @cached_property
    def base_year(self) -> int:
        year = self.config.base_year or self.panel.last_year
        if year not in self.history:
            raise PipelineError('complexity', DataError(
                f"The base year {year} isn't in the filtered panel"))
        return year

    @cached_property
    def base_state(self) -> YearState:
        return self.history[self.base_year]

    @cached_property
    def base_scores(self) -> ComplexityScores:
        with stage('complexity'):
            snap = self.base_state.snapshot
            return compute_eci_pci(snap.m, snap.locations, snap.activities)

    @cached_property
    def calibrations(self) -> Dict[Tuple[Variant, Regime], Calibration]:
        variants = [Variant.FULL]
        if self.config.variant != Variant.FULL.value:
            variants.append(Variant(self.config.variant))
        with stage('calibrate'):
            return {
                (variant, regime): calibrate(
                    self.history, regime, self.config.tau,
                    self.config.delta_t, variant, self.config.workers)
                for variant in variants for regime in Regime
            }

    def model(self, regime: Regime):
        return self.calibrations[(Variant.FULL, regime)].averaged

    @cached_property
    def prediction(self) -> FuturePrediction:
        with stage('forecast'):
            return predict_future(self.model(Regime.ENTRY),
                                  self.model(Regime.EXIT), self.base_state)

    @cached_property
    def focal_locations(self) -> Tuple[str, ...]:
        known = self.prediction.eci_pred
        if not self.config.locations:
            return tuple(sorted(known))
        unknown = [c for c in self.config.locations if c not in known]
        if unknown:
            raise PipelineError('effort', DataError(
                f"No forecast for the focal locations {', '.join(unknown)}"))
        return self.config.locations

    @cached_property
    def efforts(self) -> Dict[str, EffortMatrix]:
        with stage('effort'):
            return {
                location: compute_effort(
                    location, self.model(Regime.ENTRY),
                    self.model(Regime.EXIT), self.base_state,
                    self.prediction, self.config.pricing, self.base_scores)
                for location in self.focal_locations
            }

    @cached_property
    def growth_model(self) -> GrowthModel:
        if self.macro is None:
            raise ConfigError("The growth model needs the macro series")
        with stage('growth'):
            annual = apply_filters(
                smooth_moving_average(self.raw_panel,
                                      self.config.growth_window),
                self.macro, self._rules())
            eci_history = {}
            periods = []
            for start, end in self.config.growth_periods:
                if start not in annual.years:
                    logging.warning("No output data for %d, the %d-%d"
                                    " growth period is skipped", start,
                                    start, end)
                    continue
                snap = compute_rca(annual, start)
                eci_history[start] = compute_eci_pci(
                    snap.m, snap.locations, snap.activities)
                periods.append((start, end))
            if not periods:
                raise DataError("None of the growth periods has output"
                                " data")

            panel = assemble_growth_panel(self.macro, eci_history, periods)
            return fit_growth_model(
                panel, GrowthVariant(self.config.growth_variant))

    def location_z(self, location: str) -> float:
        latest = self.macro.latest_gdp_pc(location, self.base_year)
        if latest is None:
            raise PipelineError('growth', DataError(
                f"No GDP per capita for {location} up to {self.base_year}"))
        return location_z(self.growth_model, latest[1])

    def target_for(self, location: str,
                   value: Optional[float] = None) -> float:
        """
        The target ECI of a location, with `value` in the unit of the
        configured target (the configured value by default).
        """

        target = self.config.target
        if target is None:
            raise ConfigError("No target was given (target_delta,"
                              " target_eci or target_growth)")
        value = target.value if value is None else value
        if target.kind == 'eci':
            return value
        if target.kind == 'delta':
            with stage('optimize'):
                return delta_target(self.base_scores, location, value)
        with stage('growth'):
            return invert_target_eci(self.growth_model, value,
                                     self.location_z(location))

    @cached_property
    def methods(self) -> Tuple[str, ...]:
        return tuple(m.id for m in METHODS if m.compared
                     and (m.id != 'benchmark' or self.config.benchmark))

    def portfolio(self, location: str, method: str) -> Optional[Portfolio]:
        key = (location, method)
        if key not in self._portfolios:
            target = self.target_for(location)
            with stage(method):
                try:
                    self._portfolios[key] = select_portfolio(
                        method, self.efforts[location], target)
                except DataError as e:
                    if method == 'optimal':
                        raise
                    logging.warning("No %s portfolio for %s: %s", method,
                                    location, e)
                    self._portfolios[key] = None
            result = self._portfolios[key]
            if method == 'optimal' and result is not None \
                    and not result.feasible:
                logging.warning("The target %.4f is out of reach for %s,"
                                " the max-achievable ECI is %.4f", target,
                                location, result.achieved_eci)
                self.infeasible = True

        return self._portfolios[key]

    @cached_property
    def property_panel(self) -> PropertyPanel:
        snap = self.base_state.snapshot
        records = []
        with stage('report'):
            for location in self.focal_locations:
                eci_t = self.base_scores.eci_of(location)
                diversity = int(snap.diversity[snap.locations.index(
                    location)])
                eci_t = np.nan if eci_t is None else eci_t
                for method in self.methods:
                    portfolio = self.portfolio(location, method)
                    if portfolio is None:
                        records.append(unavailable_row(
                            location, method, eci_t, diversity,
                            self.target_for(location)))
                        continue
                    volume = added_volume(portfolio.activities, location,
                                          self.panel, self.base_year)
                    records.append(property_row(portfolio, eci_t, diversity,
                                                volume))

            return build_property_panel(records)

    # Outputs

    def write_ingest(self) -> None:
        save_panel(self.panel, self.path('panel.txt'))

    def write_complexity(self) -> None:
        with stage('complexity'):
            write_rca_csv(self.base_state.snapshot, self.path('rca.csv'))
            write_complexity_csv(self.base_scores,
                                 self.path('complexity.csv'))
            write_proximity_csv(self.base_state.relatedness,
                                self.path('proximity.csv'))

    def write_calibrate(self) -> None:
        calibrations = [self.calibrations[key]
                        for key in sorted(self.calibrations,
                                          key=lambda k: (k[0].value,
                                                         k[1].value))]
        write_models_csv(calibrations, self.path('models.csv'))

    def write_sweep(self) -> None:
        with stage('sweep'):
            models = sweep(self.history, self.config.sweep_tau,
                           self.config.sweep_delta_t,
                           Variant(self.config.variant), self.config.workers)
        write_sweep_csv(models, self.path('sweep.csv'))

    def write_effort(self) -> None:
        for location, effort in self.efforts.items():
            frame = pd.DataFrame.from_records(
                [dataclasses.asdict(c) for c in effort.candidates],
                columns=['activity', 'w', 'pci', 'rca', 'omega',
                         'omega_rel'])
            frame['baseline'] = False
            baseline = pd.DataFrame({'activity': effort.baseline,
                                     'w': 0.0, 'pci': effort.baseline_pci,
                                     'baseline': True})
            pd.concat([baseline, frame]).sort_values(
                'activity', kind='mergesort').to_csv(
                    self.path('locations', safe_name(location),
                              'effort.csv'), index=False)

    def write_portfolios(self, method: str) -> None:
        column = 'pci_future' if self.config.pricing == 'future' \
            else 'pci_current'
        for location in self.focal_locations:
            portfolio = self.portfolio(location, method)
            if portfolio is None:
                continue
            effort = self.efforts[location]
            pd.DataFrame({
                'activity': portfolio.activities,
                'w': [c.w for c in portfolio.selected],
                column: [c.pci for c in portfolio.selected],
                'cumulative_eci': portfolio.cumulative_eci(effort)
            }, columns=['activity', 'w', column, 'cumulative_eci']).to_csv(
                self.path('locations', safe_name(location),
                          f'portfolio_{method}.csv'), index=False)

            if method != 'optimal':
                continue
            rows = diagram_rows(effort, portfolio)
            write_diagram_csv(rows, self.path(
                'locations', safe_name(location), 'effort_diagram.csv'))
            if self.config.diagrams and not rows.empty:
                emit_diagram_svg(
                    rows, self.path('locations', safe_name(location),
                                    'effort_diagram.svg'),
                    title=f"{location}: target ECI"
                    f" {portfolio.target_eci:.3f}",
                    target=portfolio.target_eci)

    def write_growth_targets(self) -> None:
        model = self.growth_model
        write_growth_csv(model, self.path('growth_model.csv'))

        target = self.config.target
        target_growth = target.value if target is not None \
            and target.kind == 'growth' else np.nan
        records = []
        for location in self.focal_locations:
            z = self.location_z(location)
            eci_pred = self.prediction.eci_pred[location]
            records.append({
                'location': location,
                'z': z,
                'eci_pred': eci_pred,
                'growth_pred': predict_growth(model, eci_pred, z),
                'target_growth': target_growth,
                'target_eci': np.nan if np.isnan(target_growth)
                else self.target_for(location)
            })
        pd.DataFrame.from_records(
            records, columns=['location', 'z', 'eci_pred', 'growth_pred',
                              'target_growth', 'target_eci']).to_csv(
                self.path('growth_targets.csv'), index=False)

    def write_sequences(self) -> None:
        targets = self.config.sequence_targets
        if not targets:
            return
        for location in self.focal_locations:
            effort = self.efforts[location]
            table = sequential_targets(
                effort, targets,
                lambda value: self.target_for(location, value))
            table.to_csv(self.path('locations', safe_name(location),
                                   'sequence.csv'), index=False)
            if not table.empty and not table['feasible'].all():
                self.infeasible = True

    def write_properties(self) -> None:
        write_property_panel(self.property_panel,
                             self.path('property_panel.csv'),
                             self.path('property_fits.csv'))

    def write_manifest(self) -> None:
        """
        Writes the manifest of the run. It has to be the last output.
        """

        def package_version(name: str) -> str:
            try:
                return __import__(name).__version__
            except (ImportError, AttributeError):
                return 'unknown'

        config = dataclasses.asdict(self.config)
        del config['output_dir']
        inputs = {path: sha256_of(path)
                  for path in (self.config.panel, self.config.macro)
                  if path is not None}
        outputs = {rel.replace(os.sep, '/'): sha256_of(
            os.path.join(self.config.output_dir, rel))
                   for rel in sorted(self.outputs)}
        manifest = {
            'ecitarget': __version__,
            'config': config,
            'inputs': inputs,
            'outputs': outputs,
            'relatedness': RELATEDNESS_VARIANT,
            'packages': {name: package_version(name)
                         for name in MANIFEST_PACKAGES}
        }
        with open(os.path.join(self.config.output_dir, MANIFEST), 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True, default=str)
            f.write('\n')

    def run(self, command: Optional[str] = None) -> None:
        """
        Writes the outputs of a command, 'report' being all of them but
        the sweep.
        """

        command = command or self.config.command
        actions = {
            'ingest': [self.write_ingest],
            'complexity': [self.write_complexity],
            'calibrate': [self.write_calibrate],
            'sweep': [self.write_sweep],
            'effort': [self.write_effort],
            'optimize': [lambda: self.write_portfolios('optimal'),
                         self.write_sequences],
            'benchmark': [lambda: self.write_portfolios('benchmark')],
            'growth-target': [self.write_growth_targets],
            'report': [self.write_ingest, self.write_complexity,
                       self.write_calibrate, self.write_effort,
                       lambda: self.write_portfolios('optimal'),
                       self.write_sequences,
                       self.write_properties]
        }
        try:
            steps = actions[command]
        except KeyError:
            raise ConfigError(f"Unknown command '{command}'")

        if command == 'report':
            if self.config.benchmark:
                steps.insert(-1, lambda: self.write_portfolios('benchmark'))
            if self.config.target is not None \
                    and self.config.target.kind == 'growth':
                steps.insert(-1, self.write_growth_targets)

        for step in steps:
            step()
        self.write_manifest()
        logging.info("Wrote %d outputs to %s", len(self.outputs),
                     self.config.output_dir)


def run_pipeline(config: RunConfig,
                 extra_outputs: Sequence[str] = ()) -> Pipeline:
    """
    Runs the configured command. `extra_outputs` are files already written
    to the output directory (relative to it) that the manifest must list.
    """

    pipeline = Pipeline(config)
    for rel in extra_outputs:
        pipeline.outputs.append(rel)
    pipeline.run()

    return pipeline
