"""
This package emits the outputs of a run: the effort-complexity diagrams,
the property panels comparing selection methods, and the orchestration of
every stage in `ecitarget.report.pipeline`.

This module contains the report's theme colors and the curve fitting used
by the panels.
"""

from typing import Sequence, Tuple

import numpy as np

from ecitarget import DataError


class Colors:
    """
    Contains the report colors in hexadecimal.
    """

    candidate = '#b0b0b0'
    selected = '#1f5fbf'
    baseline = '#282828'
    fit = '#e33120'


def quadratic_fit(xs: Sequence[float],
                  ys: Sequence[float]) -> Tuple[float, float, float]:
    """
    Least-squares coefficients (c0, c1, c2) of y = c0 + c1 x + c2 x^2.
    """

    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys):
        raise ValueError("xs and ys have different lengths")
    if len(np.unique(xs)) < 3:
        raise DataError("A quadratic fit needs at least three distinct x"
                        " values")

    design = np.vander(xs, 3, increasing=True)
    coefficients, _, _, _ = np.linalg.lstsq(design, ys, rcond=None)

    return tuple(float(c) for c in coefficients)
