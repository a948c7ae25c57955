"""
This module has utilities used in different parts of the program, like the
enumerations shared between stages, the base exceptions and the small
numerical helpers.
"""

from enum import Enum
from typing import Optional, Tuple
from dataclasses import dataclass

import numpy as np


class Provenance(Enum):
    """
    The processing stage an output panel has gone through.
    """

    RAW = 'raw'
    SMOOTHED = 'smoothed'
    FILTERED = 'filtered'


class Regime(Enum):
    """
    The two subsamples used when calibrating the forecast model: cells that
    could become a specialization (entry) and cells that already are one
    (exit).
    """

    ENTRY = 'entry'
    EXIT = 'exit'


class EciTargetError(Exception):
    """
    Base exception for every error raised on purpose inside this package.
    """


class ConfigError(EciTargetError):
    """
    The configuration (arguments, config file or environment) is invalid.
    """


class DataError(EciTargetError):
    """
    The input data doesn't satisfy what a stage needs from it.
    """


class PipelineError(EciTargetError):
    """
    Wraps an error raised inside a pipeline stage so that the stage name can
    be reported to the user.
    """

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class BaseModuleData:
    """
    This dataclass describes the base attributes of an implementation that
    can be chosen by name, like the portfolio methods inside
    ecitarget.portfolio. These attributes are used to describe them to the
    user and to initialize them programatically.
    """

    id: str
    short_name: str
    description: str
    module: str
    class_name: str


def find_module(data: Tuple[BaseModuleData, ...],
                module_id: str) -> BaseModuleData:
    for element in data:
        if element.id == module_id:
            return element

    raise ConfigError(f"Module with id {module_id} not found")


def zscore(values: np.ndarray, what: str = "vector"
           ) -> Tuple[np.ndarray, Tuple[float, float]]:
    """
    Standardizes a vector with its mean and sample standard deviation. The
    used (mean, std) pair is returned too, so that it can be stored and
    reused later.

    A vector without variance can't be standardized, and a DataError is
    raised instead of returning NaNs.
    """

    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DataError(f"Can't standardize a {what} with fewer than two"
                        " elements")
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    if not np.isfinite(std) or std <= 1e-12 * max(1.0, abs(mean)):
        raise DataError(f"The {what} has zero variance")

    return (values - mean) / std, (mean, std)


def parse_float_list(text: Optional[str]) -> Tuple[float, ...]:
    """
    Parses lists like "0.19, 0.24,0.29" from the config. An empty or missing
    value is an empty tuple.
    """

    if text in (None, ''):
        return ()

    try:
        return tuple(float(x) for x in text.split(',') if x.strip() != '')
    except ValueError as e:
        raise ConfigError(f"Invalid list of numbers '{text}': {e}")


def parse_range(text: str) -> Tuple[int, ...]:
    """
    Parses integer ranges from the config, either as a list ("2,5,8") or as
    an inclusive span ("1-9").
    """

    text = text.strip()
    try:
        if '-' in text and ',' not in text:
            first, last = (int(x) for x in text.split('-', 1))
            return tuple(range(first, last + 1))
        return tuple(int(x) for x in text.split(',') if x.strip() != '')
    except ValueError as e:
        raise ConfigError(f"Invalid range '{text}': {e}")
