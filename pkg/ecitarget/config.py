"""
This module combines customization options from the four different sources,
in order of priority:
    * __setattr__
    * The argument parser
    * The environment (only for the options listed in ENVIRONMENT)
    * The config file
    * The default options

`Config.run_config` validates the options and freezes them into a
`RunConfig`, which is what the rest of the program uses.
"""

import os
import errno
import argparse
import configparser
from dataclasses import dataclass
from typing import Optional, Union, Tuple, Any, List

from appdirs import AppDirs

from ecitarget import ConfigError, parse_float_list, parse_range
from ecitarget.ingest import SCHEMAS, FilterRules
from ecitarget.version import __version__


# Default config path in the system
APP_DIRS = AppDirs("ecitarget", "ecitarget")
DEFAULT_PATH = os.path.join(APP_DIRS.user_config_dir, "config.ini")

COMMANDS = ('ingest', 'complexity', 'calibrate', 'sweep', 'effort',
            'optimize', 'benchmark', 'growth-target', 'report')

# Options that can also be set with an environment variable.
ENVIRONMENT = {
    'output_dir': 'ECITARGET_OUTPUT_DIR'
}


@dataclass
class Option:
    # Description used in the argument parser help message.
    description: str
    # The option's type on both the argument parser and the config file.
    type: type
    # The default value that the option takes when it's not found in the
    # arguments or config file.
    default: Any


@dataclass
class Argument(Option):
    # The argparse action: 'store', 'store_true'. Will be ignored if `args`
    # is None.
    arg_action: str
    # Arguments that the option can take, like ("-o", "--output-dir"). A
    # single name without dashes is a positional argument.
    args: Tuple[str, ...]


@dataclass
class ConfigOption(Option):
    # The section in the config file, like 'Defaults'.
    section: str


@dataclass
class FullOption(Argument, ConfigOption):
    pass


OPTIONS = {
    # The stage to run, only available for the argument parser.
    'command': Argument(
        description="the stage to run, every stage that it depends on is"
        " run first.",
        type=str,
        default='report',
        args=('command',),
        arg_action='store'),

    # Debug flag to show useful messages when things go wrong.
    # Note: for the argument options with a single identifier, a comma has to
    # be used at the end to specify that it's a tuple.
    'debug': FullOption(
        description="display debug messages.",
        type=bool,
        default=False,
        args=('--debug',),
        arg_action='store_true',
        section='Defaults'),

    # Custom config file, only available for the argument parser.
    'config_file': Argument(
        description="the config file path.",
        type=str,
        default=DEFAULT_PATH,
        args=('--config-file',),
        arg_action='store'),

    'workers': FullOption(
        description="threads used to fit the start years in parallel.",
        type=int,
        default=1,
        args=('--workers',),
        arg_action='store',
        section='Defaults'),

    # Input data
    'panel': FullOption(
        description="CSV with the location x activity x year output data.",
        type=str,
        default=None,
        args=('--panel',),
        arg_action='store',
        section='Data'),

    'schema': FullOption(
        description="the schema of the panel CSV: 'trade' or 'payroll'.",
        type=str,
        default='trade',
        args=('--schema',),
        arg_action='store',
        section='Data'),

    'macro': FullOption(
        description="CSV with GDP per capita and population. It's needed for"
        " the population filter and the growth model.",
        type=str,
        default=None,
        args=('--macro',),
        arg_action='store',
        section='Data'),

    'window': FullOption(
        description="years in the moving average applied to the panel.",
        type=int,
        default=4,
        args=('--window',),
        arg_action='store',
        section='Data'),

    'growth_window': FullOption(
        description="years in the moving average of the panel used for the"
        " ECI of the growth model.",
        type=int,
        default=1,
        args=('--growth-window',),
        arg_action='store',
        section='Data'),

    # Filters. Unset thresholds take the schema's defaults.
    'min_location_total': FullOption(
        description="minimum yearly output of a location.",
        type=float,
        default=None,
        args=('--min-location-total',),
        arg_action='store',
        section='Filters'),

    'min_population': FullOption(
        description="minimum population of a location.",
        type=float,
        default=None,
        args=('--min-population',),
        arg_action='store',
        section='Filters'),

    'min_activity_total': FullOption(
        description="minimum yearly output of an activity.",
        type=float,
        default=None,
        args=('--min-activity-total',),
        arg_action='store',
        section='Filters'),

    # Forecast and growth models
    'base_year': FullOption(
        description="the year the forecast starts from. Defaults to the last"
        " year in the panel.",
        type=int,
        default=None,
        args=('--base-year',),
        arg_action='store',
        section='Model'),

    'delta_t': FullOption(
        description="forecast horizon in years.",
        type=int,
        default=10,
        args=('--delta-t',),
        arg_action='store',
        section='Model'),

    'tau': FullOption(
        description="years from the base year to the steppingstone.",
        type=int,
        default=5,
        args=('--tau',),
        arg_action='store',
        section='Model'),

    'variant': FullOption(
        description="regressors of the calibrated models: 'full',"
        " 'steppingstone' or 'relatedness'. Only full models can forecast.",
        type=str,
        default='full',
        args=('--variant',),
        arg_action='store',
        section='Model'),

    'sweep_tau': FullOption(
        description="steppingstones of the sweep, like '1-9' or '2,5,8'.",
        type=str,
        default='1-9',
        args=('--sweep-tau',),
        arg_action='store',
        section='Model'),

    'sweep_delta_t': FullOption(
        description="horizons of the sweep, like '2-10'.",
        type=str,
        default='2-10',
        args=('--sweep-delta-t',),
        arg_action='store',
        section='Model'),

    'growth_periods': FullOption(
        description="periods of the growth model, like"
        " '1999-2009,2009-2019'.",
        type=str,
        default='1999-2009,2009-2019',
        args=('--growth-periods',),
        arg_action='store',
        section='Model'),

    'growth_variant': FullOption(
        description="terms of the growth model: 'solow', 'eci' or 'full'.",
        type=str,
        default='full',
        args=('--growth-variant',),
        arg_action='store',
        section='Model'),

    # Targets. Exactly one of the three can be used.
    'target_delta': FullOption(
        description="target ECI as an increase over each location's base"
                    " year ECI, in standard deviations of the ECI.",
        type=float,
        default=None,
        args=('--target-delta',),
        arg_action='store',
        section='Target'),

    'target_eci': FullOption(
        description="absolute target ECI.",
        type=float,
        default=None,
        args=('--target-eci',),
        arg_action='store',
        section='Target'),

    'target_growth': FullOption(
        description="target annualized growth of GDP per capita, in percent."
        " It's turned into a target ECI with the growth model.",
        type=float,
        default=None,
        args=('--target-growth',),
        arg_action='store',
        section='Target'),

    'locations': FullOption(
        description="comma separated ids of the focal locations. Every"
        " location is used by default.",
        type=str,
        default=None,
        args=('-l', '--locations'),
        arg_action='store',
        section='Target'),

    'sequence_targets': FullOption(
        description="ascending comma separated targets, in the unit of the"
        " target used, for the sequential product tables.",
        type=str,
        default=None,
        args=('--sequence-targets',),
        arg_action='store',
        section='Target'),

    'pricing': FullOption(
        description="PCI used to price the candidates: 'future' (forecast)"
        " or 'current' (base year).",
        type=str,
        default='future',
        args=('--pricing',),
        arg_action='store',
        section='Target'),

    # Negated option, it has to be set to False in the config file to be
    # equivalent.
    'benchmark': FullOption(
        description="do not run the relatedness-complexity benchmark.",
        type=bool,
        default=True,
        args=('--no-benchmark',),
        arg_action='store_false',
        section='Target'),

    # Outputs
    'output_dir': FullOption(
        description="directory where the outputs are written. It can also"
        " be set with ECITARGET_OUTPUT_DIR.",
        type=str,
        default='ecitarget-output',
        args=('-o', '--output-dir'),
        arg_action='store',
        section='Report'),

    'diagrams': FullOption(
        description="do not draw the effort-complexity diagrams.",
        type=bool,
        default=True,
        args=('--no-diagrams',),
        arg_action='store_false',
        section='Report')
}


@dataclass(frozen=True)
class TargetSpec:
    """
    How the target ECI of each location is set: 'delta' (added to the
    location's baseline ECI), 'eci' (absolute) or 'growth' (percent per
    year, inverted with the growth model).
    """

    kind: str
    value: float


@dataclass(frozen=True)
class RunConfig:
    """
    The validated and immutable options of a run.
    """

    command: str
    panel: Optional[str]
    schema: str
    macro: Optional[str]
    window: int
    growth_window: int
    filters: FilterRules
    base_year: Optional[int]
    delta_t: int
    tau: int
    variant: str
    sweep_tau: Tuple[int, ...]
    sweep_delta_t: Tuple[int, ...]
    growth_periods: Tuple[Tuple[int, int], ...]
    growth_variant: str
    target: Optional[TargetSpec]
    locations: Tuple[str, ...]
    sequence_targets: Tuple[float, ...]
    pricing: str
    benchmark: bool
    diagrams: bool
    output_dir: str
    workers: int = 1

    @property
    def horizon(self) -> Optional[int]:
        return None if self.base_year is None \
            else self.base_year + self.delta_t


def _parse_periods(text: str) -> Tuple[Tuple[int, int], ...]:
    periods = []
    for item in text.split(','):
        if item.strip() == '':
            continue
        try:
            start, end = (int(x) for x in item.split('-'))
        except ValueError:
            raise ConfigError(f"Invalid growth period '{item}'")
        if end <= start:
            raise ConfigError(f"Invalid growth period '{item}'")
        periods.append((start, end))

    return tuple(periods)


class Config:
    """
    Class containing all configuration options from the argument parser,
    the environment and the config file.
    """

    def __init__(self) -> None:
        """
        Initializing the argument parser and the config file.
        """

        self._argparser = argparse.ArgumentParser(
            prog="ecitarget",
            description="Minimum-effort diversification portfolios that"
            " reach a target economic complexity. Read more about the"
            " options in the README.")
        self.add_arguments()

        self._file = configparser.ConfigParser()
        self._args = None
        self._path = None

    def add_arguments(self) -> None:
        """
        Initializes all the available options for the argument parser.

        The default values must be set to None, because the fallback values
        will be determined later in the __getattr__ function.
        """

        self._argparser.add_argument(
            "-v", "--version",
            action="version",
            version=f"%(prog)s {__version__}",
            help="show program's version number and exit")

        for name, data in OPTIONS.items():
            if not isinstance(data, Argument):
                continue

            # A text with the default value is also shown in the description.
            if data.arg_action == "store_false":
                default = not data.default
            else:
                default = data.default

            kwargs = {
                'action': data.arg_action,
                'default': None,
                'help': f"{data.description} Default is '{default}'"
            }
            # Positional arguments take their name from `args`
            if data.args[0].startswith('-'):
                kwargs['dest'] = name
            else:
                kwargs['nargs'] = '?'
                kwargs['choices'] = COMMANDS
            # Only store arguments must specify their type.
            if data.arg_action == 'store':
                kwargs['type'] = data.type

            self._argparser.add_argument(*data.args, **kwargs)

    def read_file(self, attr: str) -> Optional[Union[bool, int, float, str]]:
        """
        Reads the value in the config file for a specified attribute. Its type
        and section are obtained from the default options object.

        This assumes the key's option data inherits form ConfigOption.
        """

        option = OPTIONS[attr]

        # Empty values are treated as unset
        if self._file.get(option.section, attr).strip() == '':
            return None

        try:
            if option.type == bool:
                return self._file.getboolean(option.section, attr)

            if option.type == int:
                return self._file.getint(option.section, attr)

            if option.type == float:
                return self._file.getfloat(option.section, attr)

            return self._file.get(option.section, attr)
        except ValueError as e:
            # Showing a more detailed error than the one given by configparser
            raise ConfigError(f"Error when parsing the config file: in the"
                              f" {option.section} section, {attr} doesn't"
                              f" have a valid type ({e}).")

    def read_env(self, attr: str) -> Optional[Union[bool, int, float, str]]:
        try:
            value = os.environ[ENVIRONMENT[attr]]
        except KeyError:
            return None
        if value == '':
            return None

        try:
            return OPTIONS[attr].type(value)
        except ValueError as e:
            raise ConfigError(f"Invalid value in {ENVIRONMENT[attr]}: {e}")

    def write_file(self, section: str, name: str, value: any) -> None:
        """
        Modifies a value from the config file. If the section doesn't exist,
        it's created.
        """

        # None would be written as the literal 'None', so nothing is written
        if value is None:
            return

        if section not in self._file.sections():
            self._file.add_section(section)

        self._file[section][name] = str(value)
        with open(self._path, 'w') as configfile:
            self._file.write(configfile)

    def save_effective(self, path: str) -> None:
        """
        Writes every resolved config file option to `path`, except for the
        output directory, so that a run can be repeated.
        """

        effective = configparser.ConfigParser()
        for name, option in OPTIONS.items():
            if not isinstance(option, ConfigOption) or name == 'output_dir':
                continue
            value = getattr(self, name)
            if not effective.has_section(option.section):
                effective.add_section(option.section)
            effective[option.section][name] = '' if value is None \
                else str(value)

        with open(path, 'w') as configfile:
            effective.write(configfile)

    def parse(self, config_file: Optional[str] = None,
              argv: Optional[List[str]] = None) -> None:
        """
        Parses the options from the arguments and config file.

        The config path can be passed as a function parameter or as an argument
        inside the program. If none of these exist, the default path will be
        used, defined at the top of this file.

        The config file will also be created if it isn't found.
        """

        self._args = self._argparser.parse_args(argv)
        self._path = config_file or self.config_file

        # Checking if the directory exists and creating it
        dirname = os.path.dirname(self._path)
        if not os.path.isdir(dirname) and dirname not in (None, ''):
            # Checking for a race condition
            try:
                os.makedirs(dirname)
            except OSError as e:
                if e.errno != errno.EEXIST:
                    raise

        # Checking if the file exists and creating it
        if not os.path.exists(self._path):
            with open(self._path, 'w') as f:
                f.write("[Defaults]\n")

        self._file = configparser.ConfigParser()
        try:
            self._file.read(self._path)
        except configparser.Error as e:
            raise ConfigError(f"Invalid config file {self._path}: {e}")

    def run_config(self) -> RunConfig:
        """
        Validates the options and returns them as a RunConfig.
        """

        if self.schema not in [s.id for s in SCHEMAS]:
            raise ConfigError(f"Unknown schema '{self.schema}'")
        if not 0 < self.tau < self.delta_t:
            raise ConfigError(f"The steppingstone must satisfy 0 < tau <"
                              f" delta_t (tau={self.tau},"
                              f" delta_t={self.delta_t})")
        for name in ('window', 'growth_window', 'workers'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.pricing not in ('future', 'current'):
            raise ConfigError(f"Unknown pricing '{self.pricing}'")
        if self.variant not in ('full', 'steppingstone', 'relatedness'):
            raise ConfigError(f"Unknown variant '{self.variant}'")
        if self.growth_variant not in ('solow', 'eci', 'full'):
            raise ConfigError(f"Unknown growth variant"
                              f" '{self.growth_variant}'")

        targets = [TargetSpec(kind, getattr(self, f'target_{kind}'))
                   for kind in ('delta', 'eci', 'growth')
                   if getattr(self, f'target_{kind}') is not None]
        if len(targets) > 1:
            raise ConfigError("Only one of target_delta, target_eci and"
                              " target_growth can be used")

        sequence = parse_float_list(self.sequence_targets)
        if any(b <= a for a, b in zip(sequence, sequence[1:])):
            raise ConfigError("The sequence targets must be strictly"
                              " ascending")

        schema_rules = FilterRules.for_schema(self.schema)
        filters = FilterRules(
            min_location_total=schema_rules.min_location_total
            if self.min_location_total is None else self.min_location_total,
            min_population=schema_rules.min_population
            if self.min_population is None else self.min_population,
            min_activity_total=schema_rules.min_activity_total
            if self.min_activity_total is None else self.min_activity_total)

        locations = () if self.locations is None else tuple(
            sorted({x.strip() for x in self.locations.split(',')
                    if x.strip() != ''}))

        return RunConfig(
            command=self.command,
            panel=self.panel,
            schema=self.schema,
            macro=self.macro,
            window=self.window,
            growth_window=self.growth_window,
            filters=filters,
            base_year=self.base_year,
            delta_t=self.delta_t,
            tau=self.tau,
            variant=self.variant,
            sweep_tau=parse_range(self.sweep_tau),
            sweep_delta_t=parse_range(self.sweep_delta_t),
            growth_periods=_parse_periods(self.growth_periods),
            growth_variant=self.growth_variant,
            target=targets[0] if targets else None,
            locations=locations,
            sequence_targets=sequence,
            pricing=self.pricing,
            benchmark=self.benchmark,
            diagrams=self.diagrams,
            output_dir=self.output_dir,
            workers=self.workers)

    def __setattr__(self, attr: str, value: any) -> None:
        """
        The usual __setattr__ function, but it also updates the config file
        with the value (unless it's None).
        """

        # The value is still saved inside the object, so that the assigned
        # value will have priority over defaults/config file/arguments
        self.__dict__[attr] = value

        # Internal attributes will also call this method when they're set,
        # so this makes sure it's a valid option when it's written into the
        # config file.
        try:
            option = OPTIONS[attr]
        except KeyError:
            pass
        else:
            if isinstance(option, ConfigOption):
                self.write_file(option.section, attr, value)

    def __getattr__(self, attr: str
                    ) -> Optional[Union[bool, int, float, str]]:
        """
        Return the configuration from all sources in the correct order:
            arguments > environment > config file > defaults

        __getattr__ isn't called by definition if the attribute exists in
        the object, so any value that was set with __setattr__ previously
        will have priority.
        """

        try:
            option = OPTIONS[attr]
        except KeyError:
            raise AttributeError(attr)

        if isinstance(option, Argument):
            value = getattr(self._args, attr, None)
            # The arguments are configured to default to None.
            if value is not None:
                return value

        if attr in ENVIRONMENT:
            value = self.read_env(attr)
            if value is not None:
                return value

        # The config option might be empty, like this:
        #   [Defaults]
        #   option =
        # Or the [Defaults] section isn't declared, which raises a different
        # exception.
        if isinstance(option, ConfigOption):
            try:
                value = self.read_file(attr)
            except (configparser.NoOptionError, configparser.NoSectionError):
                pass
            else:
                if value is not None:
                    return value

        # If it wasn't in the arguments or config file, the default value is
        # returned.
        return option.default
