"""Shared numerical kernels.

Adaptive quadrature (QUADPACK via :func:`scipy.integrate.quad`), improper
integrals with a doubling cutoff, inversion of increasing functions, summation
of slowly converging alternating/oscillating series, and the Gamma function.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from math import comb
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    NoDecayDetected,
    NonPositiveArgument,
    NotConverging,
    OutOfRange,
    QuadratureFailure,
)

__all__ = [
    "QuadControl",
    "SeriesControl",
    "SeriesSum",
    "adaptive_integrate",
    "improper_integrate",
    "log_time_integrate",
    "invert_monotone",
    "alternating_series_sum",
    "levin_u",
    "gamma_fn",
]


@dataclass(frozen=True)
class QuadControl:
    """Tolerances and budget for quadrature.

    ``improper_cutoff`` is the first upper limit tried for integrals over
    ``(a, inf)``; it is doubled while the next segment still matters.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    improper_cutoff: float = 10.0
    max_doublings: int = 12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.improper_cutoff > 0:
            raise ValueError("improper_cutoff must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


@dataclass(frozen=True)
class SeriesControl:
    """Truncation and acceleration settings for series.

    ``truncation_k`` terms are summed (indices ``0 .. truncation_k - 1``); one
    more term is evaluated to bound the remainder.
    """

    truncation_k: int = 20
    tail_tol: float = 1e-8
    accelerate: bool = True

    def __post_init__(self):
        if self.truncation_k < 1:
            raise ValueError("truncation_k must be >= 1")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")


DEFAULT_QUAD = QuadControl()
DEFAULT_SERIES = SeriesControl()


def adaptive_integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    ctl: QuadControl | None = None,
    points: Sequence[float] | None = None,
) -> float:
    """Integrate ``f`` over the finite interval ``[a, b]``.

    Raises:
        QuadratureFailure: the estimate is not finite or its error estimate
            exceeds ``max(abs_tol, rel_tol * |result|)``.
    """
    ctl = ctl or DEFAULT_QUAD
    if a == b:
        return 0.0
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if points is not None:
        points = [p for p in points if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            f,
            a,
            b,
            epsabs=ctl.abs_tol,
            epsrel=ctl.rel_tol,
            limit=ctl.max_subdivisions,
            points=points,
        )[:2]
    if not (math.isfinite(value) and math.isfinite(err)):
        raise QuadratureFailure(f"non-finite integral on [{a}, {b}]")
    if err > ctl.tolerance(value):
        raise QuadratureFailure(
            f"error estimate {err:.3g} exceeds tolerance {ctl.tolerance(value):.3g} on [{a}, {b}]"
        )
    return float(value)


def _tail_integral(f, c, ctl):
    # t = c e^v turns a power tail t^-q into the exponential e^(-(q-1) v)
    g = lambda v: f(c * math.exp(v)) * c * math.exp(v) if v < 700 else 0.0  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            g, 0.0, np.inf, epsabs=ctl.abs_tol, epsrel=ctl.rel_tol, limit=ctl.max_subdivisions
        )[:2]
    if not (math.isfinite(value) and math.isfinite(err)) or err > ctl.tolerance(value):
        raise QuadratureFailure(f"tail integral on [{c}, inf) did not converge")
    return float(value)


def improper_integrate(
    f: Callable[[float], float],
    a: float,
    ctl: QuadControl | None = None,
    points: Sequence[float] | None = None,
) -> float:
    """Integrate an eventually decaying ``f`` over ``[a, inf)``.

    The body ``[a, c]`` is integrated with ``c = max(a, 0) + improper_cutoff``.
    Segments ``[c, 2c]`` are then added while they exceed the tolerance. If
    the doubling budget runs out but the segments shrink, the rest of the tail
    goes to QUADPACK's infinite-range rule after the substitution ``t = c e^v``.

    Raises:
        NoDecayDetected: successive segments stop shrinking.
    """
    ctl = ctl or DEFAULT_QUAD
    if a < 0:
        raise ValueError("improper_integrate needs a >= 0")
    c = a + ctl.improper_cutoff
    total = adaptive_integrate(f, a, c, ctl, points)
    previous = math.inf
    growth = 0
    for _ in range(ctl.max_doublings):
        seg = adaptive_integrate(f, c, 2 * c, ctl, points)
        total += seg
        c *= 2
        if abs(seg) <= ctl.tolerance(total):
            return total
        if abs(seg) >= abs(previous):
            growth += 1
            if growth >= 2:
                raise NoDecayDetected(f"segment integrals not shrinking near t={c:g}")
        else:
            growth = 0
        previous = seg
    return total + _tail_integral(f, c, ctl)


def log_time_integrate(
    f: Callable[[float], float],
    ctl: QuadControl | None = None,
    log_lo: float = -30.0,
    log_hi: float = 90.0,
    width: float = 10.0,
) -> float:
    """Integrate ``f`` over ``(0, inf)`` as ``int f(e^u) e^u du`` on ``[log_lo, log_hi]``.

    Suited to densities with power-law tails such as ``t^(-3/2)``, where the
    doubling scheme of :func:`improper_integrate` converges too slowly. The
    range is cut into panels of ``width`` in ``u``.
    """
    ctl = ctl or DEFAULT_QUAD
    g = lambda u: f(math.exp(u)) * math.exp(u)  # noqa: E731
    edges = np.arange(log_lo, log_hi + width / 2, width)
    return float(sum(adaptive_integrate(g, lo, hi, ctl) for lo, hi in zip(edges[:-1], edges[1:])))


def invert_monotone(
    f: Callable[[float], float],
    y: float,
    ctl: QuadControl | None = None,
    lo: float = 0.0,
    upper: float = math.inf,
    xtol: float = 1e-12,
) -> float:
    """Solve ``f(x) = y`` for strictly increasing ``f`` on ``[lo, upper)``.

    The bracket starts at ``[lo, lo + 1]`` and its right end is doubled until
    it encloses ``y``; Brent's method (bisection with secant/inverse quadratic
    steps) then refines it to ``xtol``.
    """
    flo = f(lo)
    if y == flo:
        return lo
    if y < flo:
        raise OutOfRange(f"{y} is below f({lo}) = {flo}")
    width = 1.0
    hi = lo + width
    while True:
        if hi >= upper:
            hi = upper
        fhi = f(hi)
        if not math.isnan(fhi) and fhi >= y:
            break
        if hi >= upper or not math.isfinite(hi) or width > 1e300:
            raise OutOfRange(f"{y} is beyond the range of the function")
        lo, flo = hi, fhi
        width *= 2.0
        hi = lo + width
    if fhi == y:
        return hi
    return float(optimize.brentq(lambda t: f(t) - y, lo, hi, xtol=xtol, rtol=8.9e-16, maxiter=500))


class SeriesSum(NamedTuple):
    """Result of :func:`alternating_series_sum`.

    ``value`` is the (possibly accelerated) sum; ``bound`` estimates the
    remaining error; ``partial`` is the plain truncated sum.
    """

    value: float
    bound: float
    terms: np.ndarray
    partial: float
    method: str


def levin_u(terms: np.ndarray, order: int | None = None) -> complex:
    """Levin u-transform ``T_k^(0)`` of the partial sums of ``terms``.

    Uses the first ``order + 1`` terms, ``order = min(len - 1, 20)`` by
    default; higher orders lose everything to cancellation in double
    precision. Works for real series and for complex series whose ratio sits
    on the unit circle (Fourier-type series lifted to complex form), where
    plain averaging does nothing.
    """
    terms = np.asarray(terms)
    m = terms.size
    if m < 2:
        return complex(terms.sum())
    k = min(m - 1, 20 if order is None else order)
    partial = np.cumsum(terms[: k + 1])
    num = 0.0
    den = 0.0
    for j in range(k + 1):
        weight = (-1) ** j * comb(k, j) * ((1.0 + j) / (1.0 + k)) ** (k - 1)
        omega = (1.0 + j) * terms[j]
        num += weight * partial[j] / omega
        den += weight / omega
    return complex(num / den)


def _strictly_alternating(terms: np.ndarray) -> bool:
    if np.iscomplexobj(terms):
        if np.any(terms.imag != 0):
            return False
        terms = terms.real
    signs = np.sign(terms)
    if np.any(signs == 0) or np.any(signs[1:] == signs[:-1]):
        return False
    mags = np.abs(terms)
    return bool(np.all(mags[1:] <= mags[:-1] * (1 + 1e-12)))


def alternating_series_sum(
    term_fn: Callable[[int], complex],
    ctl: SeriesControl | None = None,
    method: str = "auto",
) -> SeriesSum:
    """Sum ``sum_{k>=0} term_fn(k)`` from its first ``truncation_k`` terms.

    Strictly alternating real series with decreasing terms get the average of
    the last two partial sums, which keeps the true sum within half the first
    omitted term. Other series (including cosine series passed in complex
    form, ``Re`` taken at the end) go through :func:`levin_u`, with the change
    between the last two transforms as the error estimate. ``method="levin"``
    uses the transform for alternating series too.

    Raises:
        NotConverging: the term magnitudes are not decreasing.
    """
    ctl = ctl or DEFAULT_SERIES
    K = ctl.truncation_k
    terms = np.array([term_fn(k) for k in range(K + 1)])
    if not np.all(np.isfinite(terms)):
        raise NotConverging("non-finite series term")
    mags = np.abs(terms)
    half = max(1, (K + 1) // 2)
    head = mags[:half].max()
    tail = mags[half:].max() if mags[half:].size else 0.0
    if tail > head * (1 + 1e-12) and tail > 0:
        raise NotConverging("series terms are not decreasing")
    partial_sum = terms[:K].sum()
    raw = float(np.real(partial_sum))
    if not ctl.accelerate:
        return SeriesSum(raw, float(mags[K]), np.real(terms[:K]), raw, "truncated")
    if method not in ("auto", "levin"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and _strictly_alternating(terms):
        value = float(np.real(partial_sum + 0.5 * terms[K]))
        return SeriesSum(value, float(mags[K]) / 2, np.real(terms[:K]), raw, "averaged")
    if K >= 3 and np.all(mags[:K] > 0):
        last = levin_u(terms[:K])
        prev = levin_u(terms[: K - 1])
        if np.isfinite(last):
            bound = max(abs(last - prev), 4 * np.finfo(float).eps * abs(last))
            return SeriesSum(float(last.real), float(bound), np.real(terms[:K]), raw, "levin")
    return SeriesSum(raw, float(mags[K]), np.real(terms[:K]), raw, "truncated")


def gamma_fn(x: float) -> float:
    """Gamma function for ``x > 0``."""
    if not x > 0:
        raise NonPositiveArgument(f"gamma_fn needs x > 0, got {x}")
    return math.gamma(x)
