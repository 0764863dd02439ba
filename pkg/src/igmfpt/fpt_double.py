"""Exit from an interval ``(a, b)`` by ``X(t) = x + B_hat(rho_hat(t))``.

Everything is computed on the symmetric interval ``(-alpha, alpha)`` after
the shift ``x -> x - (a + b)/2``. Brownian exit from ``(-alpha, alpha)``
started at ``xi`` has density

    (pi / alpha^2) sum_k (-1)^k (k + 1/2) cos((k + 1/2) pi xi / alpha) exp(-lambda_k t)

with ``lambda_k = (k + 1/2)^2 pi^2 / (2 alpha^2)``, and the exit-time moments
of ``X`` are ``sum_k A_k`` with

    A_k = (pi / alpha^2) (-1)^k (k + 1/2) cos(...) int_0^inf exp(-lambda_k s) (rho_hat^-1(s))^n ds.

The cosine series are summed in complex form,
``(-1)^k cos((2k+1) theta) = Re[e^{i theta} (-e^{2 i theta})^k]``. The
weights are split into a pure power ``c (2k+1)^-p``, fitted to the last two
weights and summed exactly with polylogarithms, and a remainder that the
Levin transform accelerates. The split keeps full accuracy near the
endpoints, where the lifted ratio tends to 1 and Levin alone degrades.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import special

from .errors import (
    DivergentMoment,
    NoDecayDetected,
    NonconstantMean,
    NotADensity,
    NotConverging,
    NotDivergent,
    OutOfDomain,
    OutOfInterval,
    QuadratureFailure,
)
from .gm_core import TransformedRepresentation
from .numerics import (
    DEFAULT_QUAD,
    DEFAULT_SERIES,
    QuadControl,
    SeriesControl,
    SeriesSum,
    adaptive_integrate,
    alternating_series_sum,
    gamma_fn,
    improper_integrate,
)

__all__ = [
    "Interval",
    "ExitMomentResult",
    "bm_exit_density",
    "exit_density",
    "exit_survival",
    "exit_moment",
    "exit_moment_curve",
    "ibm_exit_mean",
    "ibm_exit_second_moment",
    "averaged_exit_time",
    "exit_probabilities",
]

# log of the smallest exponential factor kept when truncating the density series
_LOG_DENSITY_EPS = 40.0


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise OutOfInterval(f"need a < b, got ({self.a}, {self.b})")

    @property
    def alpha(self) -> float:
        return (self.b - self.a) / 2

    @property
    def center(self) -> float:
        return (self.a + self.b) / 2

    @property
    def length(self) -> float:
        return self.b - self.a

    def shift(self, x: float, *, closed: bool = False) -> float:
        """``x - center``, after checking ``x`` lies in the interval."""
        inside = self.a <= x <= self.b if closed else self.a < x < self.b
        if not inside:
            raise OutOfInterval(f"x={x} outside ({self.a}, {self.b})")
        return x - self.center


@dataclass(frozen=True)
class ExitMomentResult:
    """A summed exit-time moment.

    ``terms`` holds the real ``A_k`` for ``k < truncation_k``; ``tail_bound``
    estimates the error of ``value`` left by stopping there.
    """

    value: float
    truncation_k: int
    tail_bound: float
    terms: np.ndarray
    method: str = "truncated"


def _rates(alpha: float, K: int) -> np.ndarray:
    k = np.arange(K) + 0.5
    return k * k * math.pi**2 / (2 * alpha * alpha)


def _fourier_density(t: float, xi: float, alpha: float, K: int) -> float:
    k = np.arange(K) + 0.5
    signs = np.where(np.arange(K) % 2 == 0, 1.0, -1.0)
    terms = signs * k * np.cos(k * math.pi * xi / alpha) * np.exp(-_rates(alpha, K) * t)
    return float(math.pi / alpha**2 * terms.sum())


def _image_density(t: float, xi: float, alpha: float, N: int = 8) -> float:
    # sum of the one-sided hitting kernels of the reflected starting points
    L = 2 * alpha
    total = 0.0
    for u in (alpha - xi, alpha + xi):
        for n in range(-N, N + 1):
            d = u + 2 * n * L
            total += d * math.exp(-d * d / (2 * t))
    return total / math.sqrt(2 * math.pi * t**3)


def _fourier_terms_needed(t: float, alpha: float) -> int:
    return int(math.ceil(math.sqrt(2 * _LOG_DENSITY_EPS / t) * alpha / math.pi)) + 1


def bm_exit_density(
    t: float,
    x: float,
    interval: Interval,
    series_ctl: SeriesControl | None = None,
    *,
    method: str = "auto",
) -> float:
    """Density at ``t`` of Brownian exit from ``interval`` started at ``x``.

    The Fourier series is truncated adaptively at
    ``max(truncation_k, K(t))`` terms, where ``K(t)`` makes the first dropped
    exponential factor ``< e^-40``. ``method="auto"`` switches to the
    method-of-images series for ``t < alpha^2``, where it converges in a few
    terms; ``"fourier"`` and ``"images"`` force one representation.
    """
    ctl = series_ctl or DEFAULT_SERIES
    xi = interval.shift(x)
    alpha = interval.alpha
    if t < 0:
        raise OutOfDomain(f"t must be nonnegative, got {t}")
    if t == 0:
        return 0.0
    if method == "images" or (method == "auto" and t < alpha * alpha):
        return _image_density(t, xi, alpha)
    if method not in ("auto", "fourier"):
        raise ValueError(f"unknown method {method!r}")
    K = max(ctl.truncation_k, _fourier_terms_needed(t, alpha))
    return _fourier_density(t, xi, alpha, K)


def _bm_exit_survival(s: float, xi: float, alpha: float) -> float:
    if s <= 0:
        return 1.0
    if s < alpha * alpha:
        # P(exit <= s) from the image series of the hitting cdf
        L = 2 * alpha
        total = 0.0
        for u in (alpha - xi, alpha + xi):
            for n in range(-8, 9):
                d = u + 2 * n * L
                total += math.copysign(special.erfc(abs(d) / math.sqrt(2 * s)), d)
        return 1.0 - total
    K = _fourier_terms_needed(s, alpha)
    k = np.arange(K) + 0.5
    signs = np.where(np.arange(K) % 2 == 0, 1.0, -1.0)
    terms = signs / k * np.cos(k * math.pi * xi / alpha) * np.exp(-_rates(alpha, K) * s)
    return float(terms.sum() * 2 / math.pi)


def _require_rep(rep: TransformedRepresentation) -> None:
    if not rep.diverges:
        raise NotDivergent(f"{rep.name}: the clock rho_hat has a finite limit")
    if not rep.constant_mean:
        raise NonconstantMean(f"{rep.name}: exit formulas need a constant mean")
    if rep.y != 0:
        raise OutOfDomain("exit formulas need y = 0; use mc_oracle.estimate_exit")


def exit_density(
    rep: TransformedRepresentation,
    x: float,
    interval: Interval,
    t: float,
    series_ctl: SeriesControl | None = None,
) -> float:
    """Density of ``tau_{a,b}(x, 0)``: Brownian exit density at ``rho_hat(t)`` times ``rho_hat'(t)``."""
    _require_rep(rep)
    interval.shift(x)
    if t < 0:
        raise OutOfDomain(f"t must be nonnegative, got {t}")
    t = rep.clamp(t)
    if t == 0:
        return 0.0
    s = float(rep.rho_hat(t))
    if s <= 0:
        return 0.0
    return bm_exit_density(s, x, interval, series_ctl) * float(rep.rho_hat_prime(t))


def exit_survival(rep: TransformedRepresentation, x: float, interval: Interval, t: float) -> float:
    """``P(tau_{a,b}(x, 0) > t)``."""
    _require_rep(rep)
    xi = interval.shift(x)
    if t < 0:
        raise OutOfDomain(f"t must be nonnegative, got {t}")
    return _bm_exit_survival(float(rep.rho_hat(rep.clamp(t))), xi, interval.alpha)


def _exit_integrals(
    rep: TransformedRepresentation,
    alpha: float,
    n: float,
    K: int,
    series_ctl: SeriesControl,
    quad_ctl: QuadControl,
) -> np.ndarray:
    """``I_k = int_0^inf exp(-lambda_k s) (rho_hat^-1(s))^n ds`` for ``k < K``."""
    lam = _rates(alpha, K)
    if rep.power_law is not None:
        c, delta = rep.power_law
        return c**n * gamma_fn(1 + n * delta) / lam ** (1 + n * delta)
    # s = rho_hat(u): I_k = int_0^inf exp(-lambda_k rho_hat(u)) u^n rho_hat'(u) du
    out = np.empty(K)
    scale = math.pi / alpha**2
    for k in range(K):
        tol = series_ctl.tail_tol / (10 * K) / (scale * (k + 0.5))
        ctl = dataclasses.replace(quad_ctl, abs_tol=tol)
        lk = float(lam[k])

        def integrand(u: float, lk=lk) -> float:
            if u <= 0:
                return 0.0
            return math.exp(-lk * float(rep.rho_hat(u))) * u**n * float(rep.rho_hat_prime(u))

        try:
            out[k] = improper_integrate(integrand, 0.0, ctl)
        except (QuadratureFailure, NoDecayDetected) as exc:
            raise DivergentMoment(f"A_{k} integral failed: {exc}") from exc
    return out


def odd_cosine_power_sum(theta: float, p: float) -> float:
    """``sum_k (-1)^k cos((2k+1) theta) / (2k+1)^p`` for ``|theta| < pi/2``, ``p > 0``.

    Equals ``Im[Li_p(w) - 2^-p Li_p(w^2)]`` with ``w = i e^{i theta}``.
    """
    w = 1j * complex(math.cos(theta), math.sin(theta))
    return float(mpmath.im(mpmath.polylog(p, w) - 2.0**-p * mpmath.polylog(p, w * w)))


def _small_time_exponent(rep: TransformedRepresentation) -> float:
    """``q`` with ``rho_hat(t) ~ C t^q`` as ``t -> 0`` (3 for smooth coefficients)."""
    if rep.power_law is not None:
        return 1.0 / rep.power_law[1]
    h = 1e-4
    q = math.log(float(rep.rho_hat(2 * h)) / float(rep.rho_hat(h))) / math.log(2.0)
    return float(round(q)) if abs(q - round(q)) < 1e-2 else q


def _weight_powers(rep: TransformedRepresentation, n: float, terms: int = 3) -> list[float]:
    # rho_hat^-1(s) is a series in s^(1/q), so weight k behaves like a sum of (2k+1)^-(1 + 2(n + j)/q)
    q = _small_time_exponent(rep)
    if rep.power_law is not None:
        return [1 + 2 * n / q]
    return [1 + 2 * (n + j) / q for j in range(terms)]


def _power_fit(weights: np.ndarray, powers: Sequence[float] | None) -> tuple[np.ndarray, list[float]] | None:
    """Coefficients ``c_j`` of ``sum_j c_j (2k+1)^-p_j`` matched to the last weights.

    Without ``powers`` a single exponent is fitted to the last two weights.
    Returns None when no decaying power fits.
    """
    K = weights.size - 1
    if powers is None:
        w1, w0 = float(weights[K]), float(weights[K - 1]) if K >= 1 else 0.0
        if not (w1 > 0 and w0 > w1):
            return None
        powers = [math.log(w0 / w1) / math.log((2 * K + 1) / (2 * K - 1))]
    powers = list(powers)
    if not all(p > 0 for p in powers) or K + 1 < 2 * len(powers):
        return None
    rows = 2 * (2.0 * np.arange(K + 1 - 2 * len(powers), K + 1) + 1)[:, None]
    A = (rows / 2) ** -np.array(powers)[None, :]
    scale = A[-1]
    c, *_ = np.linalg.lstsq(A / scale, weights[-2 * len(powers):], rcond=None)
    return c / scale, powers


def _series_at(
    xi: float,
    alpha: float,
    weights: np.ndarray,
    series_ctl: SeriesControl,
    powers: Sequence[float] | None = None,
):
    """Sum ``weights[k] (-1)^k cos((2k+1) theta)`` with ``theta = pi xi / (2 alpha)``.

    ``powers`` are the exponents of the exactly summed part; by default one
    exponent is fitted to the last two weights.
    """
    theta = math.pi * xi / (2 * alpha)
    lead = complex(math.cos(theta), math.sin(theta))
    ratio = -complex(math.cos(2 * theta), math.sin(2 * theta))
    fit = _power_fit(weights, powers)
    head = 0.0
    rest = weights
    if fit is not None:
        coef, ps = fit
        odd = 2.0 * np.arange(weights.size) + 1
        head = sum(c * odd_cosine_power_sum(theta, p) for c, p in zip(coef, ps))
        rest = weights - sum(c * odd**-p for c, p in zip(coef, ps))
        if np.max(np.abs(rest)) <= 1e-14 * np.max(np.abs(weights)):
            terms = np.real(weights[:-1] * (lead * ratio ** np.arange(weights.size - 1)))
            return SeriesSum(head, 4 * np.finfo(float).eps * abs(head), terms, float(terms.sum()), "polylog")
    try:
        res = alternating_series_sum(lambda k: rest[k] * lead * ratio**k, series_ctl, method="levin")
    except NotConverging as exc:
        raise DivergentMoment(f"exit-moment series terms do not decay: {exc}") from exc
    if fit is None:
        return res
    return SeriesSum(head + res.value, res.bound, res.terms, res.partial + head, "polylog+" + res.method)


def _check_order(n: float) -> None:
    if not n >= 1:
        raise OutOfDomain(f"moment order must be >= 1, got {n}")


def exit_moment_curve(
    rep: TransformedRepresentation,
    xs: Sequence[float],
    interval: Interval,
    n: float = 1,
    series_ctl: SeriesControl | None = None,
    quad_ctl: QuadControl | None = None,
) -> list[ExitMomentResult]:
    """:func:`exit_moment` on many starting points, sharing the ``A_k`` integrals.

    Starting points on the endpoints give 0 (immediate exit).
    """
    _require_rep(rep)
    _check_order(n)
    series_ctl = series_ctl or DEFAULT_SERIES
    quad_ctl = quad_ctl or DEFAULT_QUAD
    alpha = interval.alpha
    K = series_ctl.truncation_k
    integrals = _exit_integrals(rep, alpha, n, K + 1, series_ctl, quad_ctl)
    k = np.arange(K + 1) + 0.5
    weights = math.pi / alpha**2 * k * integrals
    powers = _weight_powers(rep, n)
    out = []
    for x in xs:
        xi = interval.shift(x, closed=True)
        if abs(xi) >= alpha:
            out.append(ExitMomentResult(0.0, K, 0.0, np.zeros(K), "endpoint"))
            continue
        res = _series_at(xi, alpha, weights, series_ctl, powers)
        out.append(ExitMomentResult(res.value, K, res.bound, res.terms, res.method))
    return out


def exit_moment(
    rep: TransformedRepresentation,
    x: float,
    interval: Interval,
    n: float = 1,
    series_ctl: SeriesControl | None = None,
    quad_ctl: QuadControl | None = None,
) -> ExitMomentResult:
    """``E[tau_{a,b}(x, 0)^n]`` as the ``A_k`` series.

    ``I_k`` uses the Gamma closed form when ``rep.power_law`` is set, and
    otherwise the quadrature ``int_0^inf exp(-lambda_k rho_hat(u)) u^n
    rho_hat'(u) du`` with absolute tolerance
    ``tail_tol / (10 truncation_k)`` per term.

    Raises:
        DivergentMoment: a term integral fails or the terms do not decay.
            The moment may still be finite; finiteness is just not established.
    """
    return exit_moment_curve(rep, [x], interval, n, series_ctl, quad_ctl)[0]


def _ibm_series(x: float, interval: Interval, power: float, prefactor: float, series_ctl) -> float:
    ctl = series_ctl or DEFAULT_SERIES
    xi = interval.shift(x, closed=True)
    alpha = interval.alpha
    if abs(xi) >= alpha:
        return 0.0
    weights = np.array([(2 * k + 1) ** -power for k in range(ctl.truncation_k + 1)])
    return prefactor * _series_at(xi, alpha, weights, ctl, [power]).value


def ibm_exit_mean(x: float, interval: Interval, series_ctl: SeriesControl | None = None) -> float:
    """Mean exit time of integrated BM::

        3^(1/3) 2^(7/3) Gamma(4/3) L^(2/3) / pi^(5/3) sum_k (-1)^k cos((2k+1) pi xi / L) / (2k+1)^(5/3)

    with ``L = b - a`` and ``xi = x - center``.
    """
    L = interval.length
    pre = 3 ** (1 / 3) * 2 ** (7 / 3) * gamma_fn(4 / 3) * L ** (2 / 3) / math.pi ** (5 / 3)
    return _ibm_series(x, interval, 5 / 3, pre, series_ctl)


def ibm_exit_second_moment(x: float, interval: Interval, series_ctl: SeriesControl | None = None) -> float:
    """Second moment of the exit time of integrated BM::

        3^(2/3) 2^(8/3) Gamma(5/3) L^(4/3) / pi^(7/3) sum_k (-1)^k cos((2k+1) pi xi / L) / (2k+1)^(7/3)

    This is the ``n = 2`` case of the ``A_k`` series with
    ``rho_hat^-1(s) = (3 s)^(1/3)``.
    """
    L = interval.length
    pre = 3 ** (2 / 3) * 2 ** (8 / 3) * gamma_fn(5 / 3) * L ** (4 / 3) / math.pi ** (7 / 3)
    return _ibm_series(x, interval, 7 / 3, pre, series_ctl)


def averaged_exit_time(
    interval: Interval,
    g: Callable[[float], float] | None = None,
    series_ctl: SeriesControl | None = None,
    quad_ctl: QuadControl | None = None,
    support: tuple[float, float] | None = None,
) -> float:
    """Mean exit time of integrated BM with a random start of density ``g``.

    ``g=None`` means uniform on the interval, where the average is
    ``3^(1/3) 2^(10/3) Gamma(4/3) L^(2/3) / pi^(8/3) sum_k (2k+1)^(-8/3)`` and the
    sum is ``(1 - 2^(-8/3)) zeta(8/3)``. Otherwise ``E(U_k) = int g(x) cos(...)
    dx`` is integrated for each term over ``support`` (default: the interval).

    Raises:
        NotADensity: ``g`` does not integrate to 1 within ``1e-6``.
    """
    L = interval.length
    if g is None:
        odd_zeta = (1 - 2 ** (-8 / 3)) * float(special.zeta(8 / 3))
        return 3 ** (1 / 3) * 2 ** (10 / 3) * gamma_fn(4 / 3) * L ** (2 / 3) / math.pi ** (8 / 3) * odd_zeta
    ctl = series_ctl or DEFAULT_SERIES
    qctl = quad_ctl or DEFAULT_QUAD
    lo, hi = support if support is not None else (interval.a, interval.b)
    if not interval.a <= lo < hi <= interval.b:
        raise OutOfInterval("support must lie inside the interval")
    mass = adaptive_integrate(g, lo, hi, qctl)
    if abs(mass - 1.0) > 1e-6:
        raise NotADensity(f"start density integrates to {mass}")
    c = interval.center

    def char(k: int) -> complex:
        w = (2 * k + 1) * math.pi / L
        re = adaptive_integrate(lambda v: math.cos(w * (v - c)) * g(v), lo, hi, qctl)
        im = adaptive_integrate(lambda v: math.sin(w * (v - c)) * g(v), lo, hi, qctl)
        return complex(re, im)

    pre = 3 ** (1 / 3) * 2 ** (7 / 3) * gamma_fn(4 / 3) * L ** (2 / 3) / math.pi ** (5 / 3)
    # Re of the complex sum equals the cosine sum
    res = alternating_series_sum(lambda k: (-1) ** k * char(k) / (2 * k + 1) ** (5 / 3), ctl, method="levin")
    return pre * res.value


def exit_probabilities(x: float, interval: Interval) -> tuple[float, float]:
    """``(pi_a, pi_b) = ((b - x)/(b - a), (x - a)/(b - a))``."""
    interval.shift(x, closed=True)
    pi_b = (x - interval.a) / interval.length
    return 1.0 - pi_b, pi_b
