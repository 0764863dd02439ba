"""Tables behind the exit-time figures, written as CSV.

fig1  mean exit time of integrated BM from (-1, 1) and the fit 1.35 sqrt(1 - x^2)
fig2  second moment, squared mean and variance for integrated BM
fig3  mean exit time of integrated OU for mu in {1, 1.2, ..., 2}, sigma = 1
fig4  second moment, squared mean and variance for integrated OU, mu = sigma = 1
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .fpt_double import Interval, exit_moment_curve, ibm_exit_mean, ibm_exit_second_moment
from .gm_core import builtin_ou, transform
from .numerics import DEFAULT_QUAD, DEFAULT_SERIES, QuadControl, SeriesControl

__all__ = ["FIGURES", "OU_MUS", "figure_table", "write_csv", "x_grid"]

FIGURES = ("fig1", "fig2", "fig3", "fig4")
OU_MUS = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
FIT_CONSTANT = 1.35
UNIT = Interval(-1.0, 1.0)


def x_grid(n: int = 201) -> np.ndarray:
    if n < 2:
        raise ValueError("need at least 2 grid points")
    return np.linspace(-1.0, 1.0, n)


def _ou_moments(mu: float, xs, n: int, series_ctl, quad_ctl) -> np.ndarray:
    rep = transform(builtin_ou(mu))
    return np.array([r.value for r in exit_moment_curve(rep, xs, UNIT, n, series_ctl, quad_ctl)])


def figure_table(
    fig: str,
    grid_points: int = 201,
    series_ctl: SeriesControl | None = None,
    quad_ctl: QuadControl | None = None,
) -> tuple[list[str], np.ndarray]:
    """Header and rows (one per grid point) for ``fig``."""
    series_ctl = series_ctl or DEFAULT_SERIES
    quad_ctl = quad_ctl or DEFAULT_QUAD
    xs = x_grid(grid_points)
    if fig == "fig1":
        mean = np.array([ibm_exit_mean(x, UNIT, series_ctl) for x in xs])
        fit = FIT_CONSTANT * np.sqrt(np.clip(1 - xs**2, 0.0, None))
        return ["x", "mean_exit_ibm", "fit_1.35_sqrt_1_minus_x2"], np.column_stack([xs, mean, fit])
    if fig == "fig2":
        mean = np.array([ibm_exit_mean(x, UNIT, series_ctl) for x in xs])
        second = np.array([ibm_exit_second_moment(x, UNIT, series_ctl) for x in xs])
        sq = mean**2
        return ["x", "second_moment", "mean_squared", "variance"], np.column_stack([xs, second, sq, second - sq])
    if fig == "fig3":
        cols = [_ou_moments(mu, xs, 1, series_ctl, quad_ctl) for mu in OU_MUS]
        header = ["x"] + [f"mean_exit_ou_mu_{mu:g}" for mu in OU_MUS]
        return header, np.column_stack([xs, *cols])
    if fig == "fig4":
        mean = _ou_moments(1.0, xs, 1, series_ctl, quad_ctl)
        second = _ou_moments(1.0, xs, 2, series_ctl, quad_ctl)
        sq = mean**2
        return ["x", "second_moment", "mean_squared", "variance"], np.column_stack([xs, second, sq, second - sq])
    raise ValueError(f"unknown figure {fig!r}; choose from {FIGURES}")


def format_value(v: float) -> str:
    """Locale-independent text for a float (17 significant digits)."""
    return repr(float(v))


def write_csv(path: str | Path, header: Sequence[str], rows: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
