"""Gauss-Markov processes and the clock that turns their integral into BM.

A process ``Y(t) = m(t) + h2(t) B(rho(t))`` is integrated to
``X(t) = x + int_0^t Y``. ``X(t)`` is Gaussian with mean ``x + M(t)`` and
variance ``rho_hat(t) = gamma(rho(t))`` where

    R(s)     = int_0^s h2(rho^-1(v)) / rho'(rho^-1(v)) dv
    gamma(s) = int_0^s (R(s) - R(v))^2 dv

Substituting ``v = rho(u)`` gives ``R(rho(t)) = H(t) = int_0^t h2`` and

    rho_hat(t)  = int_0^t (H(t) - H(u))^2 rho'(u) du
    rho_hat'(t) = 2 h2(t) int_0^t (H(t) - H(u)) rho'(u) du

which is what the quadrature path evaluates (no inverse of ``rho`` needed).
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import (
    BadOrder,
    BadParameter,
    BoundViolation,
    InconsistentInverse,
    NonMonotoneRho,
    NotDivergent,
    OutOfDomain,
    ZeroH2,
)
from .numerics import DEFAULT_QUAD, QuadControl, adaptive_integrate, invert_monotone

__all__ = [
    "GaussMarkovProcess",
    "TransformedRepresentation",
    "NormalLaw",
    "Finiteness",
    "make_process",
    "builtin_integrated_bm",
    "builtin_ou",
    "builtin_brownian_bridge",
    "transform",
    "identity_clock",
    "marginal_law",
    "time_average_law",
    "integrated_bm_covariance",
    "generalized_variance_bounds",
    "moment_finiteness",
    "estimate_growth_exponent",
]

Fn = Callable[[float], float]

# Bridge-type processes: arguments within this fraction of the horizon are
# clamped to horizon * (1 - HORIZON_GUARD).
HORIZON_GUARD = 1e-12


@dataclass(frozen=True)
class ClosedForms:
    """Analytic pieces a builtin can supply instead of quadrature."""

    M: Fn
    R: Fn | None = None
    gamma: Fn | None = None
    rho_hat: Fn | None = None
    rho_hat_prime: Fn | None = None
    rho_hat_inv: Fn | None = None


@dataclass(frozen=True)
class GaussMarkovProcess:
    """``Y(t) = m(t) + h2(t) B(rho(t))`` on ``[0, horizon)``.

    Build with :func:`make_process` or one of the ``builtin_*`` helpers,
    which validate the invariants. ``drift``/``diffusion`` are optional
    ``(t, y)`` callables for Euler stepping of the SDE form.
    """

    m: Fn
    h1: Fn
    h2: Fn
    rho: Fn
    rho_inv: Fn
    rho_prime: Fn
    horizon: float = math.inf
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    constant_mean: bool = False
    growth_exponent: float | None = None
    diverges: bool | None = None
    closed: ClosedForms | None = None
    drift: Callable | None = None
    diffusion: Callable | None = None

    @property
    def y0(self) -> float:
        return float(self.m(0.0))


@dataclass(frozen=True)
class TransformedRepresentation:
    """Clock ``rho_hat`` and mean ``M`` with ``X(t) = x + M(t) + B_hat(rho_hat(t))``.

    ``power_law = (c, delta)`` records an exact ``rho_hat^-1(s) = c s**delta``,
    which lets exit moments use a Gamma-function closed form.
    """

    M: Fn
    R: Fn
    gamma: Fn
    rho_hat: Fn
    rho_hat_inv: Fn
    rho_hat_prime: Fn
    growth_exponent: float | None
    diverges: bool
    horizon: float = math.inf
    constant_mean: bool = True
    y: float = 0.0
    name: str = "custom"
    power_law: tuple[float, float] | None = None
    process: GaussMarkovProcess | None = None

    def clamp(self, t: float) -> float:
        return _clamp(t, self.horizon)


@dataclass(frozen=True)
class NormalLaw:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


class Finiteness(enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    UNKNOWN = "unknown"


def _clamp(t: float, horizon: float) -> float:
    if t < 0:
        raise OutOfDomain(f"t={t} is negative")
    if math.isfinite(horizon):
        if t >= horizon:
            raise OutOfDomain(f"t={t} is not below the horizon {horizon}")
        return min(t, horizon * (1 - HORIZON_GUARD))
    return t


def _probe_grid(horizon: float) -> np.ndarray:
    if math.isfinite(horizon):
        return horizon * (1 - np.logspace(0, -6, 200))
    return np.concatenate(([0.0], np.logspace(-3, 2, 199)))


def _on_grid(fn: Fn, t: np.ndarray) -> np.ndarray:
    """Evaluate ``fn`` on an array, falling back to a scalar loop."""
    try:
        out = np.asarray(fn(t), dtype=float)
        if out.shape == t.shape:
            return out
        if out.ndim == 0:
            return np.full(t.shape, float(out))
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(v))) for v in t])


def make_process(
    m: Fn,
    h1: Fn,
    h2: Fn,
    rho: Fn,
    rho_inv: Fn,
    rho_prime: Fn,
    horizon: float = math.inf,
    *,
    name: str = "custom",
    params: Mapping[str, float] | None = None,
    **extra,
) -> GaussMarkovProcess:
    """Validate the ingredients on a probe grid and build the process.

    Raises:
        NonMonotoneRho: ``rho(0) != 0`` or ``rho`` decreases on the grid.
        ZeroH2: ``h2`` vanishes or changes sign on the grid.
        InconsistentInverse: ``rho_inv(rho(t))`` misses ``t``.
    """
    if not horizon > 0:
        raise BadParameter("horizon must be positive")
    grid = _probe_grid(horizon)
    r = _on_grid(rho, grid)
    if abs(r[0]) > 1e-12 or abs(float(rho(0.0))) > 1e-12:
        raise NonMonotoneRho("rho(0) must be 0")
    if not np.all(np.diff(r) > 0):
        raise NonMonotoneRho("rho is not strictly increasing on the probe grid")
    h = _on_grid(h2, grid)
    if np.any(h == 0) or np.any(np.sign(h[1:]) != np.sign(h[:-1])):
        raise ZeroH2("h2 vanishes (or changes sign) on the probe grid")
    back = _on_grid(rho_inv, r)
    if np.any(np.abs(back - grid) > 1e-8 * (1 + grid)):
        raise InconsistentInverse("rho_inv(rho(t)) != t on the probe grid")
    mean = _on_grid(m, grid)
    constant = bool(np.all(np.abs(mean - mean[0]) <= 1e-14 * (1 + abs(mean[0]))))
    return GaussMarkovProcess(
        m=m,
        h1=h1,
        h2=h2,
        rho=rho,
        rho_inv=rho_inv,
        rho_prime=rho_prime,
        horizon=horizon,
        name=name,
        params=dict(params or {}),
        constant_mean=constant,
        **extra,
    )


# --------------------------------------------------------------------------
# builtins


def builtin_integrated_bm(y: float = 0.0) -> GaussMarkovProcess:
    """``Y = y + B``; the integral has clock ``t**3 / 3``."""
    y = float(y)
    closed = ClosedForms(
        M=lambda t: y * t,
        R=lambda s: s,
        gamma=lambda s: s**3 / 3.0,
        rho_hat=lambda t: t**3 / 3.0,
        rho_hat_prime=lambda t: t**2,
        rho_hat_inv=lambda s: np.cbrt(3.0 * s),
    )
    return make_process(
        m=lambda t: y + 0.0 * t,
        h1=lambda t: t,
        h2=lambda t: 1.0 + 0.0 * t,
        rho=lambda t: t,
        rho_inv=lambda s: s,
        rho_prime=lambda t: 1.0 + 0.0 * t,
        name="integrated_bm",
        params={"y": y},
        growth_exponent=3.0,
        diverges=True,
        closed=closed,
        drift=lambda t, v: np.zeros_like(v),
        diffusion=lambda t, v: np.ones_like(v),
    )


# coefficients of u**n in u - 2(1 - e^-u) + (1 - e^-2u)/2, n = 3..22
_OU_SERIES = [(-1) ** (n + 1) * (2 ** (n - 1) - 2) / math.factorial(n) for n in range(3, 23)]


def _ou_clock_scaled(u):
    """``u - 2(1 - e^-u) + (1 - e^-2u)/2`` without cancellation at small u."""
    u = np.asarray(u, dtype=float)
    direct = u + 2.0 * np.expm1(-u) - 0.5 * np.expm1(-2.0 * u)
    small = np.abs(u) < 0.1
    if np.any(small):
        us = np.where(small, u, 0.0)
        acc = np.zeros_like(us)
        for c in reversed(_OU_SERIES):
            acc = acc * us + c
        series = acc * us**3
        direct = np.where(small, series, direct)
    return direct if direct.ndim else float(direct)


def builtin_ou(mu: float, beta: float = 0.0, sigma: float = 1.0, y: float = 0.0) -> GaussMarkovProcess:
    """Ornstein-Uhlenbeck ``dY = -mu (Y - beta) dt + sigma dB``, ``Y(0) = y``."""
    mu, beta, sigma, y = float(mu), float(beta), float(sigma), float(y)
    if not (mu > 0 and sigma > 0):
        raise BadParameter("OU needs mu > 0 and sigma > 0")
    s2 = sigma * sigma

    def rho(t):
        return s2 / (2 * mu) * np.expm1(2 * mu * t)

    def rho_inv(s):
        return np.log1p(2 * mu * s / s2) / (2 * mu)

    def rho_hat(t):
        return s2 / mu**3 * _ou_clock_scaled(mu * t)

    def rho_hat_prime(t):
        return s2 / mu**2 * np.expm1(-mu * t) ** 2

    def rho_hat_inv(s):
        if s <= 0:
            return 0.0
        return invert_monotone(rho_hat, s)

    def R(s):
        return (1.0 - (1.0 + 2 * mu * s / s2) ** -0.5) / mu

    closed = ClosedForms(
        M=lambda t: beta * t - (y - beta) * np.expm1(-mu * t) / mu,
        R=R,
        gamma=lambda s: rho_hat(rho_inv(s)),
        rho_hat=rho_hat,
        rho_hat_prime=rho_hat_prime,
        rho_hat_inv=rho_hat_inv,
    )
    return make_process(
        m=lambda t: beta - (beta - y) * np.exp(-mu * t),
        h1=lambda t: s2 / mu * np.sinh(mu * t),
        h2=lambda t: np.exp(-mu * t),
        rho=rho,
        rho_inv=rho_inv,
        rho_prime=lambda t: s2 * np.exp(2 * mu * t),
        name="integrated_ou",
        params={"mu": mu, "beta": beta, "sigma": sigma, "y": y},
        growth_exponent=1.0,
        diverges=True,
        closed=closed,
        drift=lambda t, v: -mu * (v - beta),
        diffusion=lambda t, v: np.full_like(v, sigma),
    )


def builtin_brownian_bridge(T: float, alpha: float = 0.0, beta: float = 0.0) -> GaussMarkovProcess:
    """Brownian bridge from ``alpha`` at 0 to ``beta`` at ``T``.

    ``R`` is closed form; ``gamma`` is the quadrature of its defining
    integrand.
    """
    T, alpha, beta = float(T), float(alpha), float(beta)
    if not T > 0:
        raise BadParameter("bridge needs T > 0")

    def R(s):
        return T**3 * s * (2 + T * s) / (2 * (1 + T * s) ** 2)

    def rho(t):
        return t / (T * (T - t))

    @functools.lru_cache(maxsize=4096)
    def gamma(s: float) -> float:
        if s <= 0:
            return 0.0
        Rs = R(s)
        # integrand varies on the scale 1/T near v = 0
        pts = [p for p in (1 / T * 10.0**k for k in range(-2, 14)) if p < s]
        ctl = QuadControl(abs_tol=1e-300, rel_tol=1e-11, max_subdivisions=400)
        return adaptive_integrate(lambda v: (Rs - R(v)) ** 2, 0.0, s, ctl, points=pts)

    def int_R(s):
        return T**2 / 2 * T * s * s / (1 + T * s)

    def rho_hat(t):
        if np.ndim(t):
            return np.array([rho_hat(float(v)) for v in np.ravel(t)]).reshape(np.shape(t))
        return gamma(float(rho(min(t, T * (1 - HORIZON_GUARD)))))

    def rho_hat_prime(t):
        if np.ndim(t):
            return np.array([rho_hat_prime(float(v)) for v in np.ravel(t)]).reshape(np.shape(t))
        s = rho(t)
        dR = T**3 / (1 + T * s) ** 3
        return 2 * dR * (s * R(s) - int_R(s)) / (T - t) ** 2

    def rho_hat_inv(v):
        if v <= 0:
            return 0.0
        return invert_monotone(rho_hat, v, upper=T * (1 - HORIZON_GUARD))

    closed = ClosedForms(
        M=lambda t: alpha * t + (beta - alpha) / (2 * T) * t * t,
        R=R,
        gamma=gamma,
        rho_hat=rho_hat,
        rho_hat_prime=rho_hat_prime,
        rho_hat_inv=rho_hat_inv,
    )
    return make_process(
        m=lambda t: alpha * (1 - t / T) + beta * t / T,
        h1=lambda t: t / T,
        h2=lambda t: T - t,
        rho=rho,
        rho_inv=lambda s: T * T * s / (1 + T * s),
        rho_prime=lambda t: 1.0 / (T - t) ** 2,
        horizon=T,
        name="brownian_bridge",
        params={"T": T, "alpha": alpha, "beta": beta},
        growth_exponent=None,
        diverges=False,
        closed=closed,
        drift=lambda t, v: (beta - v) / (T - t),
        diffusion=lambda t, v: np.ones_like(v),
    )


# --------------------------------------------------------------------------
# transform


def estimate_growth_exponent(rho_hat: Fn, lo: float = 1e2, hi: float = 1e4, r2_min: float = 0.999) -> float | None:
    """Slope of ``log rho_hat`` against ``log t`` on ``[lo, hi]``, or None.

    None when values are not finite/positive or the fit has ``r^2 < r2_min``.
    """
    t = np.logspace(math.log10(lo), math.log10(hi), 9)
    try:
        v = np.array([float(rho_hat(float(s))) for s in t])
    except (ArithmeticError, ValueError):
        return None
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        return None
    lx, ly = np.log(t), np.log(v)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    if ss_tot == 0:
        return None
    r2 = 1 - np.sum(resid**2) / ss_tot
    return float(slope) if r2 >= r2_min else None


def _finite_horizon_diverges(rho_hat: Fn, horizon: float) -> bool:
    vals = [rho_hat(horizon * (1 - 10.0**-k)) for k in range(1, 9)]
    inc = np.diff(vals)
    if not np.all(np.isfinite(inc)) or np.any(inc < 0):
        return True
    # geometric shrinking of the increments means a finite limit
    ratios = inc[1:] / np.where(inc[:-1] > 0, inc[:-1], np.nan)
    return not bool(np.all(ratios[-3:] < 0.9))


def transform(
    process: GaussMarkovProcess,
    quad_control: QuadControl | None = None,
    *,
    use_closed_form: bool = True,
    require_divergent: bool = False,
) -> TransformedRepresentation:
    """Compute ``M, R, gamma, rho_hat, rho_hat^-1, rho_hat'`` for ``process``.

    Builtin closed forms are used when available and ``use_closed_form`` is
    true; everything else comes from quadrature (relative tolerance of
    ``quad_control``) with memoized primitives.

    Raises:
        NotDivergent: ``require_divergent`` and the clock has a finite limit.
    """
    ctl = quad_control or DEFAULT_QUAD
    inner = dataclasses.replace(ctl, abs_tol=1e-300, max_subdivisions=max(ctl.max_subdivisions, 200))
    p = process
    closed = p.closed if use_closed_form else None
    horizon = p.horizon

    @functools.lru_cache(maxsize=65536)
    def H(t: float) -> float:
        return adaptive_integrate(lambda u: float(p.h2(u)), 0.0, t, inner) if t > 0 else 0.0

    @functools.lru_cache(maxsize=65536)
    def M_q(t: float) -> float:
        return adaptive_integrate(lambda u: float(p.m(u)), 0.0, t, inner) if t > 0 else 0.0

    def _tail_h2(u: float, t: float) -> float:
        return adaptive_integrate(lambda v: float(p.h2(v)), u, t, inner) if u < t else 0.0

    def rho_hat_q(t: float) -> float:
        t = _clamp(float(t), horizon)
        if t == 0:
            return 0.0
        # H(t) - H(u) integrated directly: subtracting cached primitives cancels badly when rho' grows fast
        return adaptive_integrate(lambda u: _tail_h2(u, t) ** 2 * float(p.rho_prime(u)), 0.0, t, inner)

    def rho_hat_prime_q(t: float) -> float:
        t = _clamp(float(t), horizon)
        if t == 0:
            return 0.0
        return 2 * float(p.h2(t)) * adaptive_integrate(lambda u: _tail_h2(u, t) * float(p.rho_prime(u)), 0.0, t, inner)

    def R_q(s: float) -> float:
        return H(float(p.rho_inv(s))) if s > 0 else 0.0

    def gamma_q(s: float) -> float:
        return rho_hat_q(float(p.rho_inv(s))) if s > 0 else 0.0

    def pick(name, fallback):
        fn = getattr(closed, name, None) if closed is not None else None
        return fn if fn is not None else fallback

    rho_hat = pick("rho_hat", rho_hat_q)
    upper = horizon * (1 - HORIZON_GUARD) if math.isfinite(horizon) else math.inf

    def rho_hat_inv_q(s: float) -> float:
        if s <= 0:
            return 0.0
        return invert_monotone(rho_hat, s, ctl, upper=upper)

    M = closed.M if closed is not None else (lambda t: M_q(float(t)))
    rep_rho_hat_inv = pick("rho_hat_inv", rho_hat_inv_q)

    exponent = p.growth_exponent
    diverges = p.diverges
    if diverges is None:
        if math.isfinite(horizon):
            diverges = _finite_horizon_diverges(rho_hat, horizon)
        else:
            exponent = estimate_growth_exponent(rho_hat)
            diverges = exponent is not None and exponent > 0
    if require_divergent and not diverges:
        raise NotDivergent(f"{p.name}: the clock rho_hat has a finite limit")

    power_law = None
    if closed is not None and p.name == "integrated_bm":
        power_law = (3.0 ** (1 / 3), 1 / 3)

    return TransformedRepresentation(
        M=M,
        R=pick("R", R_q),
        gamma=pick("gamma", gamma_q),
        rho_hat=rho_hat,
        rho_hat_inv=rep_rho_hat_inv,
        rho_hat_prime=pick("rho_hat_prime", rho_hat_prime_q),
        growth_exponent=exponent,
        diverges=bool(diverges),
        horizon=horizon,
        constant_mean=p.constant_mean,
        y=p.y0,
        name=p.name,
        power_law=power_law,
        process=p,
    )


def _no_integrand(s):
    raise NotImplementedError("plain Brownian motion is not an integrated process")


def identity_clock(power_law: bool = True) -> TransformedRepresentation:
    """Representation with ``rho_hat(t) = t``: plain Brownian motion.

    Useful as a sanity case, since exit-time moments of BM are elementary.
    ``R`` is undefined here and raises.
    """
    ident = lambda t: t  # noqa: E731
    return TransformedRepresentation(
        M=lambda t: 0.0 * t,
        R=_no_integrand,
        gamma=ident,
        rho_hat=ident,
        rho_hat_inv=ident,
        rho_hat_prime=lambda t: 1.0 + 0.0 * t,
        growth_exponent=1.0,
        diverges=True,
        name="brownian_motion",
        power_law=(1.0, 1.0) if power_law else None,
    )


# --------------------------------------------------------------------------
# laws


def marginal_law(rep: TransformedRepresentation, x: float, t: float) -> NormalLaw:
    """Law of ``X(t)`` started at ``X(0) = x``: ``N(x + M(t), rho_hat(t))``."""
    t = rep.clamp(t)
    if t == 0:
        return NormalLaw(float(x), 0.0)
    return NormalLaw(float(x + rep.M(t)), float(rep.rho_hat(t)))


def time_average_law(rep: TransformedRepresentation, T: float) -> NormalLaw:
    """Law of ``(1/T) int_0^T Y``: ``N(M(T)/T, rho_hat(T)/T^2)``."""
    if not T > 0:
        raise OutOfDomain("T must be positive")
    T = rep.clamp(T)
    return NormalLaw(float(rep.M(T)) / T, float(rep.rho_hat(T)) / (T * T))


def integrated_bm_covariance(s: float, t: float) -> float:
    """``cov(int_0^s B, int_0^t B) = s^2 (3t - s) / 6`` for ``0 <= s <= t``."""
    if s < 0:
        raise BadParameter("s must be nonnegative")
    if s > t:
        raise BadOrder(f"need s <= t, got s={s}, t={t}")
    return s * s * (3 * t - s) / 6.0


def generalized_variance_bounds(
    alpha: Fn,
    beta: Fn,
    alpha1: Fn,
    beta1: Fn,
    t: float,
    quad_control: QuadControl | None = None,
) -> tuple[float, float]:
    """Bounds on ``Var(int_0^t Y | rho(t))`` when only ``alpha <= rho <= beta`` is known.

    ``alpha1 <= A' <= beta1`` bound the derivative of the inverse clock, so
    ``R`` lies between their primitives. Returns
    ``(gamma_lo(alpha(t)), gamma_hi(beta(t)))``.

    Raises:
        BoundViolation: ``alpha(t) > beta(t)`` or ``alpha1 > beta1`` somewhere.
    """
    ctl = dataclasses.replace(quad_control or DEFAULT_QUAD, abs_tol=1e-300)
    lo_t, hi_t = float(alpha(t)), float(beta(t))
    if lo_t > hi_t:
        raise BoundViolation(f"alpha(t)={lo_t} exceeds beta(t)={hi_t}")
    if lo_t < 0:
        raise BoundViolation("alpha(t) must be nonnegative")
    probe = np.linspace(0.0, hi_t, 65)
    a1 = np.array([float(alpha1(s)) for s in probe])
    b1 = np.array([float(beta1(s)) for s in probe])
    if np.any(a1 > b1) or np.any(a1 < 0):
        raise BoundViolation("need 0 <= alpha1 <= beta1")

    def gamma_from(rate: Fn, s: float) -> float:
        if s <= 0:
            return 0.0
        prim = functools.lru_cache(maxsize=None)(
            lambda v: adaptive_integrate(lambda w: float(rate(w)), 0.0, v, ctl) if v > 0 else 0.0
        )
        Rs = prim(s)
        return adaptive_integrate(lambda v: (Rs - prim(v)) ** 2, 0.0, s, ctl)

    return gamma_from(alpha1, lo_t), gamma_from(beta1, hi_t)


def moment_finiteness(rep: TransformedRepresentation, p: float) -> Finiteness:
    """Whether ``E[tau_a(x, 0)^p]`` is finite, from the clock's growth exponent.

    With ``rho_hat(t) ~ c t^alpha`` the density tail is ``t^(-1 - alpha/2)``,
    so the ``p``-th moment is finite iff ``alpha > 2p``.
    """
    if not p > 0:
        raise BadParameter("p must be positive")
    if not rep.diverges:
        raise NotDivergent(f"{rep.name}: the clock rho_hat has a finite limit")
    if rep.growth_exponent is None:
        return Finiteness.UNKNOWN
    return Finiteness.FINITE if rep.growth_exponent > 2 * p else Finiteness.INFINITE
