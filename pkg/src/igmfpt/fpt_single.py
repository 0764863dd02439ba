"""One-boundary first-passage quantities for ``X(t) = x + y t + B_hat(rho_hat(t))``.

With ``y = 0`` the passage time through a level at distance ``d`` is
``rho_hat^-1`` of a Brownian passage time, whose density is the
inverse-Gaussian kernel ``d / sqrt(2 pi s^3) exp(-d^2 / 2s)``. The density,
survival function and moments below are all pulled back through the clock.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

from scipy import special

from .errors import (
    BadParameter,
    NonconstantMean,
    NotADensity,
    NotDivergent,
    OutOfDomain,
    RequiresSimulation,
    UnknownFiniteness,
    UnsupportedBoundary,
)
from .gm_core import Finiteness, TransformedRepresentation, moment_finiteness
from .numerics import DEFAULT_QUAD, QuadControl, adaptive_integrate, gamma_fn, improper_integrate

__all__ = [
    "Direction",
    "ConstantBoundary",
    "LinearInRhoHat",
    "CubicIBM",
    "GenericCurve",
    "bm_hitting_density",
    "fpt_density",
    "fpt_survival",
    "fpt_moment",
    "fpt_restricted_mean",
    "ibm_mean_fpt",
    "moving_boundary_density",
    "randomized_start_mean",
    "gamma_start_mean",
    "gamma_start_density",
]

_SQRT_2PI = math.sqrt(2 * math.pi)


class Direction(enum.Enum):
    FROM_BELOW = "below"
    FROM_ABOVE = "above"
    HITTING = "hitting"


@dataclass(frozen=True)
class ConstantBoundary:
    a: float
    direction: Direction = Direction.HITTING

    def distance(self, x: float) -> float:
        """Distance the process must travel; checks the side of ``x``."""
        if x == self.a:
            raise BadParameter("start point lies on the boundary")
        if self.direction is Direction.FROM_BELOW and not x < self.a:
            raise BadParameter("FROM_BELOW needs x < a")
        if self.direction is Direction.FROM_ABOVE and not x > self.a:
            raise BadParameter("FROM_ABOVE needs x > a")
        return abs(self.a - x)


@dataclass(frozen=True)
class LinearInRhoHat:
    """``S(t) = a + b rho_hat(t) + y t``: linear in the Brownian clock."""

    a: float
    b: float

    def curve(self, rep: TransformedRepresentation) -> Callable:
        return lambda t: self.a + self.b * rep.rho_hat(t) + rep.y * t

    @property
    def s0(self) -> float:
        return self.a


@dataclass(frozen=True)
class CubicIBM:
    """``S(t) = a + y t + b t^3`` for integrated BM, i.e. slope ``3b`` in the clock."""

    a: float
    y: float
    b: float

    def __post_init__(self):
        if not self.b < 0:
            raise BadParameter("CubicIBM needs b < 0")

    def curve(self, rep: TransformedRepresentation | None = None) -> Callable:
        return lambda t: self.a + self.y * t + self.b * t**3

    @property
    def s0(self) -> float:
        return self.a


@dataclass(frozen=True)
class GenericCurve:
    """Any boundary ``S(t)``; only the Monte Carlo oracle handles these."""

    S: Callable

    def curve(self, rep: TransformedRepresentation | None = None) -> Callable:
        return self.S

    @property
    def s0(self) -> float:
        return float(self.S(0.0))


def _require_fpt_rep(rep: TransformedRepresentation, *, zero_velocity: bool = True) -> None:
    if not rep.diverges:
        raise NotDivergent(f"{rep.name}: clock has a finite limit, no time-change representation")
    if not rep.constant_mean:
        raise NonconstantMean(f"{rep.name}: first-passage formulas need a constant mean")
    if zero_velocity and rep.y != 0:
        raise RequiresSimulation("no closed form for y != 0; use mc_oracle.estimate_fpt")


def _check_time(t: float) -> None:
    if not t >= 0:
        raise OutOfDomain(f"t must be nonnegative, got {t}")


def _distance(x: float, a) -> float:
    if isinstance(a, ConstantBoundary):
        return a.distance(x)
    return ConstantBoundary(float(a)).distance(x)


def bm_hitting_density(s: float, d: float, slope: float = 0.0) -> float:
    """Density at ``s`` of the first time ``B`` reaches ``d + slope * s`` (``d > 0``)."""
    if s <= 0:
        return 0.0
    log_f = math.log(d) - math.log(_SQRT_2PI) - 1.5 * math.log(s) - (d + slope * s) ** 2 / (2 * s)
    return math.exp(log_f)


def fpt_density(rep: TransformedRepresentation, x: float, a, t: float) -> float:
    """Density of ``tau_a(x, 0)`` at ``t``.

    ``a`` is a level or a :class:`ConstantBoundary`; a bare level means
    hitting from whichever side ``x`` is on.
    """
    _require_fpt_rep(rep)
    d = _distance(x, a)
    _check_time(t)
    t = rep.clamp(t)
    if t == 0:
        return 0.0
    s = float(rep.rho_hat(t))
    if s <= 0:
        return 0.0
    return bm_hitting_density(s, d) * float(rep.rho_hat_prime(t))


def fpt_survival(rep: TransformedRepresentation, x: float, a, t: float) -> float:
    """``P(tau_a(x, 0) > t) = erf(d / sqrt(2 rho_hat(t)))``."""
    _require_fpt_rep(rep)
    d = _distance(x, a)
    _check_time(t)
    t = rep.clamp(t)
    s = float(rep.rho_hat(t))
    if s <= 0:
        return 1.0
    return float(special.erf(d / math.sqrt(2 * s)))


def fpt_restricted_mean(rep: TransformedRepresentation, x: float, a, t_max: float, ctl: QuadControl | None = None) -> float:
    """``E[min(tau_a(x, 0), t_max)] = int_0^t_max P(tau > t) dt``."""
    d = _distance(x, a)
    return adaptive_integrate(lambda t: fpt_survival(rep, x, a, t), 0.0, t_max, ctl, points=[d ** (2 / 3)])


def fpt_moment(
    rep: TransformedRepresentation,
    x: float,
    a,
    p: float = 1.0,
    ctl: QuadControl | None = None,
    *,
    force: bool = False,
) -> float:
    """``E[tau_a(x, 0)^p]``, or ``math.inf`` when the moment diverges.

    Finiteness is decided from the clock's growth exponent before any
    integration. The integral over the Brownian passage time is taken in
    ``z = 1/s``::

        int_0^inf (rho_hat^-1(1/z))^p d z^(-1/2) exp(-d^2 z / 2) dz / sqrt(2 pi)

    Raises:
        UnknownFiniteness: no growth exponent and ``force`` is false.
    """
    _require_fpt_rep(rep)
    d = _distance(x, a)
    finite = moment_finiteness(rep, p)
    if finite is Finiteness.INFINITE:
        return math.inf
    if finite is Finiteness.UNKNOWN and not force:
        raise UnknownFiniteness(f"{rep.name}: growth exponent unknown; pass force=True to integrate anyway")
    ctl = ctl or DEFAULT_QUAD
    inv = rep.rho_hat_inv

    def integrand(z: float) -> float:
        if z <= 0:
            return 0.0
        return float(inv(1.0 / z)) ** p * d * math.exp(-0.5 * d * d * z) / (_SQRT_2PI * math.sqrt(z))

    z0 = 1.0 / (d * d)
    body = adaptive_integrate(integrand, 0.0, z0, ctl)
    return body + improper_integrate(integrand, z0, ctl)


def ibm_mean_fpt(x: float, a: float) -> float:
    """Mean passage time of integrated BM (``y = 0``): ``(3/2)^(1/3) Gamma(1/6) |a-x|^(2/3) / sqrt(pi)``."""
    d = abs(a - x)
    return (1.5) ** (1 / 3) * gamma_fn(1 / 6) * d ** (2 / 3) / math.sqrt(math.pi)


def moving_boundary_density(rep: TransformedRepresentation, x: float, boundary, t: float) -> float:
    """Density of the first time ``X`` meets a boundary linear in the clock.

    :class:`CubicIBM` reduces to :class:`LinearInRhoHat` with slope ``3b``
    because ``t^3 = 3 rho_hat(t)`` for integrated BM.

    Raises:
        UnsupportedBoundary: a :class:`GenericCurve` (simulate it instead).
    """
    _require_fpt_rep(rep, zero_velocity=False)
    if isinstance(boundary, GenericCurve):
        raise UnsupportedBoundary("no closed-form density for a generic curve; use mc_oracle.estimate_fpt")
    if isinstance(boundary, CubicIBM):
        if rep.power_law is None or rep.name != "integrated_bm":
            raise BadParameter("CubicIBM applies to integrated BM only")
        if boundary.y != rep.y:
            raise BadParameter(f"boundary velocity {boundary.y} differs from the process's y={rep.y}")
        boundary = LinearInRhoHat(boundary.a, 3 * boundary.b)
    if not isinstance(boundary, LinearInRhoHat):
        raise UnsupportedBoundary(f"unsupported boundary {boundary!r}")
    if not x < boundary.a:
        raise BadParameter("need x below the boundary at t = 0")
    _check_time(t)
    t = rep.clamp(t)
    if t == 0:
        return 0.0
    s = float(rep.rho_hat(t))
    return bm_hitting_density(s, boundary.a - x, boundary.b) * float(rep.rho_hat_prime(t))


def randomized_start_mean(
    a: float,
    g: Callable[[float], float],
    ctl: QuadControl | None = None,
    support: tuple[float, float] | None = None,
) -> float:
    """Mean passage time of integrated BM through ``a`` from a random start with density ``g``.

    ``support`` (a subinterval of ``(-inf, a]``) restricts the quadrature
    and is needed for narrow densities.

    Raises:
        NotADensity: ``g`` does not integrate to 1 within ``1e-6``.
    """
    ctl = ctl or DEFAULT_QUAD
    if support is None:
        mass = improper_integrate(lambda z: g(a - z), 0.0, ctl)
        weighted = improper_integrate(lambda z: z ** (2 / 3) * g(a - z), 0.0, ctl)
    else:
        lo, hi = support
        if not lo < hi <= a:
            raise BadParameter("support must lie below a")
        mass = adaptive_integrate(g, lo, hi, ctl)
        weighted = adaptive_integrate(lambda v: (a - v) ** (2 / 3) * g(v), lo, hi, ctl)
    if abs(mass - 1.0) > 1e-6:
        raise NotADensity(f"start density integrates to {mass}")
    return (1.5) ** (1 / 3) * gamma_fn(1 / 6) / math.sqrt(math.pi) * weighted


def gamma_start_mean(a: float, alpha: float, lam: float) -> float:
    """Closed form of :func:`randomized_start_mean` when ``a - eta ~ Gamma(alpha, lam)``.

    The result does not depend on ``a``.
    """
    if not (alpha > 0 and lam > 0):
        raise BadParameter("alpha and lambda must be positive")
    if not math.isfinite(a):
        raise BadParameter("a must be finite")
    return (1.5 / lam**2) ** (1 / 3) / math.sqrt(math.pi) * gamma_fn(1 / 6) * gamma_fn(alpha + 2 / 3) / gamma_fn(alpha)


def gamma_start_density(a: float, alpha: float, lam: float) -> Callable[[float], float]:
    """Density of ``eta`` when ``a - eta ~ Gamma(alpha, lam)``."""
    if not (alpha > 0 and lam > 0):
        raise BadParameter("alpha and lambda must be positive")
    log_norm = alpha * math.log(lam) - math.lgamma(alpha)

    def g(v: float) -> float:
        z = a - v
        if z <= 0:
            return 0.0
        return math.exp(log_norm - lam * z + (alpha - 1) * math.log(z))

    return g
