"""Analytic-versus-simulation check suite.

Each check pairs an analytic value with a Monte Carlo estimate and passes
when they differ by at most ``n_se`` standard errors. Simulations use
``PathConfig`` seeds derived from the suite seed, so a run is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import IgmFptError
from .fpt_double import Interval, exit_probabilities, ibm_exit_mean, ibm_exit_second_moment
from .fpt_single import CubicIBM, fpt_survival, ibm_mean_fpt, moving_boundary_density
from .gm_core import builtin_integrated_bm, builtin_ou, integrated_bm_covariance, transform
from .mc_oracle import PathConfig, estimate_covariance, estimate_exit, estimate_fpt, simulate_fpt, simulate_xy
from .numerics import adaptive_integrate

__all__ = ["CheckResult", "run_validation", "format_report", "LOW_POWER_PATHS"]

LOW_POWER_PATHS = 10_000


@dataclass(frozen=True)
class CheckResult:
    name: str
    analytic: float
    estimate: float
    std_error: float
    n_se: float
    seed: int
    note: str = ""

    @property
    def z(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.estimate == self.analytic else math.inf
        return abs(self.estimate - self.analytic) / self.std_error

    @property
    def passed(self) -> bool:
        return math.isfinite(self.estimate) and self.z <= self.n_se


def _fraction(hits: np.ndarray) -> tuple[float, float]:
    p = float(hits.mean())
    return p, math.sqrt(max(p * (1 - p), 1e-300) / hits.size)


def _checks(config: PathConfig) -> list[tuple[str, Callable[[PathConfig], tuple[float, float, float, str]]]]:
    ibm = builtin_integrated_bm()
    ou = builtin_ou(1.0)
    ibm_rep = transform(ibm)
    unit = Interval(-1.0, 1.0)

    def ibm_var(cfg):
        s = simulate_xy(ibm, 0.0, replace(cfg, t_max=max(cfg.dt * 2, 1.0)), times=[1.0])
        x = s.X[:, 0]
        v = float(np.var(x, ddof=1))
        se = v * math.sqrt(2.0 / (x.size - 1))
        return 1 / 3, v, se, ""

    def ibm_cov(cfg):
        est = estimate_covariance(ibm, 0.0, 1.0, 2.0, replace(cfg, t_max=2.0))
        return integrated_bm_covariance(1.0, 2.0), est.mean, est.std_error, ""

    def ibm_cdf(cfg):
        tau, _ = simulate_fpt(ibm, 0.0, 1.0, replace(cfg, t_max=2.0))
        p, se = _fraction(~np.isnan(tau) & (tau <= 1.0))
        return 1 - fpt_survival(ibm_rep, 0.0, 1.0, 1.0), p, se, ""

    def cubic_cdf(cfg):
        bnd = CubicIBM(1.0, 0.0, -0.5)
        tau, _ = simulate_fpt(ibm, 0.0, bnd, replace(cfg, t_max=1.0))
        p, se = _fraction(~np.isnan(tau))
        val = adaptive_integrate(lambda t: moving_boundary_density(ibm_rep, 0.0, bnd, t), 0.0, 1.0)
        return val, p, se, ""

    def ibm_mean(d):
        def run(cfg):
            est = estimate_fpt(ibm, 0.0, d, cfg)
            return ibm_mean_fpt(0.0, d), est.mean, est.std_error, f"censored {est.censored_fraction:.3f}"

        return run

    def exit_check(process, x, which):
        def run(cfg):
            est = estimate_exit(process, x, unit, cfg)
            if which == "mean":
                return ibm_exit_mean(x, unit), est.mean.mean, est.mean.std_error, ""
            if which == "second":
                return ibm_exit_second_moment(x, unit), est.second_moment.mean, est.second_moment.std_error, ""
            return exit_probabilities(x, unit)[1], est.pi_b, est.pi_std_error, ""

        return run

    return [
        ("ibm_var_X1", ibm_var),
        ("ibm_cov_X1_X2", ibm_cov),
        ("ibm_fpt_cdf_d1_t1", ibm_cdf),
        ("ibm_cubic_boundary_cdf_t1", cubic_cdf),
        ("ibm_mean_fpt_d0.5", ibm_mean(0.5)),
        ("ibm_mean_fpt_d1", ibm_mean(1.0)),
        ("ibm_mean_fpt_d2", ibm_mean(2.0)),
        ("ibm_exit_mean_x0", exit_check(ibm, 0.0, "mean")),
        ("ibm_exit_second_moment_x0", exit_check(ibm, 0.0, "second")),
        ("ibm_pi_b_x0", exit_check(ibm, 0.0, "pi")),
        ("ibm_pi_b_x0.5", exit_check(ibm, 0.5, "pi")),
        ("ou_pi_b_x0.5", exit_check(ou, 0.5, "pi")),
    ]


def run_validation(
    n_paths: int = 200_000,
    dt: float = 1e-3,
    seed: int = 0,
    n_se: float = 3.0,
    t_max: float = 50.0,
    only: list[str] | None = None,
) -> list[CheckResult]:
    """Run every check (or those named in ``only``).

    Check ``i`` uses seed ``seed + i``. A check whose computation raises is
    reported as failed with the error in its note.
    """
    results = []
    for i, (name, fn) in enumerate(_checks(PathConfig(dt=dt, t_max=t_max, n_paths=n_paths, seed=seed))):
        if only is not None and name not in only:
            continue
        cfg = PathConfig(dt=dt, t_max=t_max, n_paths=n_paths, seed=seed + i)
        try:
            analytic, estimate, se, note = fn(cfg)
        except IgmFptError as exc:
            analytic, estimate, se, note = math.nan, math.nan, math.nan, f"error: {exc}"
        if n_paths < LOW_POWER_PATHS:
            note = (note + "; " if note else "") + "reduced power"
        results.append(CheckResult(name, float(analytic), float(estimate), float(se), n_se, cfg.seed, note))
    return results


def format_report(results: list[CheckResult]) -> str:
    head = f"{'check':<28} {'analytic':>14} {'estimate':>14} {'std_err':>11} {'z':>7} {'tol':>5} {'seed':>5}  status"
    lines = [head]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = (
            f"{r.name:<28} {r.analytic:>14.8g} {r.estimate:>14.8g} {r.std_error:>11.4g} "
            f"{r.z:>7.2f} {r.n_se:>5.2g} {r.seed:>5d}  {status}"
        )
        if r.note:
            line += f"  ({r.note})"
        lines.append(line)
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
