"""Monte Carlo simulation of ``(Y, X)`` paths and first-passage estimators.

Exact scheme: on a grid ``t_i = i dt`` the Gauss-Markov process obeys

    Y_{i+1} = m_{i+1} + (h2_{i+1} / h2_i) (Y_i - m_i) + h2_{i+1} sqrt(rho_{i+1} - rho_i) Z_i

with iid standard normals ``Z_i``, so ``Y`` is sampled without
discretization error. ``X`` is the trapezoidal integral of ``Y``, and a
crossing is detected at grid points only, which biases passage times upward
by ``O(dt)``.

Paths are simulated in chunks of ``chunk_size``; chunk ``j`` draws from
``Generator(PCG64(SeedSequence(seed).spawn(n_chunks)[j]))``, so results depend
only on ``seed`` and the chunking, never on ``workers``.
"""

from __future__ import annotations

import concurrent.futures
import csv
import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np

from .errors import AllCensored, BadParameter, OutOfDomain, OutOfInterval
from .fpt_double import Interval
from .fpt_single import ConstantBoundary, CubicIBM, Direction, GenericCurve, LinearInRhoHat
from .gm_core import GaussMarkovProcess, transform

__all__ = [
    "Scheme",
    "PathConfig",
    "McEstimate",
    "ExitEstimate",
    "PathSample",
    "simulate_xy",
    "simulate_fpt",
    "estimate_fpt",
    "estimate_exit",
    "estimate_covariance",
    "export_paths_csv",
]


class Scheme(enum.Enum):
    EXACT_GAUSSIAN = "exact"
    EULER = "euler"


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1e-3
    t_max: float = 50.0
    n_paths: int = 200_000
    seed: int = 0
    scheme: Scheme = Scheme.EXACT_GAUSSIAN
    chunk_size: int = 10_000
    workers: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.dt < self.t_max):
            raise BadParameter("need 0 < dt < t_max")
        if self.n_paths < 1 or self.chunk_size < 1 or self.workers < 1:
            raise BadParameter("n_paths, chunk_size and workers must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def chunks(self) -> list[tuple[int, np.random.Generator]]:
        sizes = [self.chunk_size] * (self.n_paths // self.chunk_size)
        if self.n_paths % self.chunk_size:
            sizes.append(self.n_paths % self.chunk_size)
        children = np.random.SeedSequence(self.seed).spawn(len(sizes))
        return [(n, np.random.Generator(np.random.PCG64(c))) for n, c in zip(sizes, children)]


@dataclass(frozen=True)
class McEstimate:
    """Sample mean over uncensored paths, with its standard error."""

    mean: float
    std_error: float
    n_effective: int
    censored_fraction: float
    seed: int = 0

    def within(self, value: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_se * self.std_error


@dataclass(frozen=True)
class ExitEstimate:
    mean: McEstimate
    second_moment: McEstimate
    pi_a: float
    pi_b: float
    pi_std_error: float
    censored_fraction: float


@dataclass(frozen=True)
class PathSample:
    t: np.ndarray
    Y: np.ndarray
    X: np.ndarray


# --------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, nogil=True)
def _fpt_kernel(gen, n, x0, y0, m, ratio, scale, upper, lower, dt):
    n_steps = ratio.size
    tau = np.full(n, np.nan)
    side = np.zeros(n, dtype=np.int8)
    half = 0.5 * dt
    for p in range(n):
        x = x0
        y = y0
        for i in range(n_steps):
            yn = m[i + 1] + ratio[i] * (y - m[i]) + scale[i] * gen.standard_normal()
            x += half * (y + yn)
            y = yn
            if x >= upper[i + 1]:
                tau[p] = (i + 1) * dt
                side[p] = 1
                break
            if x <= lower[i + 1]:
                tau[p] = (i + 1) * dt
                side[p] = -1
                break
    return tau, side


@numba.njit(cache=True, nogil=True)
def _record_kernel(gen, n, x0, y0, m, ratio, scale, dt, record):
    # record[i] >= 0 marks step i as the record[i]-th recorded column
    n_rec = 0
    for i in range(record.size):
        if record[i] >= 0:
            n_rec += 1
    xs = np.empty((n, n_rec))
    ys = np.empty((n, n_rec))
    half = 0.5 * dt
    for p in range(n):
        x = x0
        y = y0
        if record[0] >= 0:
            xs[p, record[0]] = x
            ys[p, record[0]] = y
        for i in range(ratio.size):
            yn = m[i + 1] + ratio[i] * (y - m[i]) + scale[i] * gen.standard_normal()
            x += half * (y + yn)
            y = yn
            j = record[i + 1]
            if j >= 0:
                xs[p, j] = x
                ys[p, j] = y
    return xs, ys


def _grid(process: GaussMarkovProcess, config: PathConfig):
    if math.isfinite(process.horizon) and config.t_max >= process.horizon:
        raise OutOfDomain(f"t_max={config.t_max} must be below the horizon {process.horizon}")
    t = np.arange(config.n_steps + 1) * config.dt
    return t


def _coefficients(process: GaussMarkovProcess, t: np.ndarray):
    m = np.asarray(process.m(t), dtype=float) * np.ones_like(t)
    h2 = np.asarray(process.h2(t), dtype=float) * np.ones_like(t)
    rho = np.asarray(process.rho(t), dtype=float) * np.ones_like(t)
    drho = np.diff(rho)
    if np.any(drho < 0):
        raise BadParameter("rho decreases on the simulation grid")
    ratio = h2[1:] / h2[:-1]
    scale = h2[1:] * np.sqrt(drho)
    return m, ratio, scale


def _run_chunks(fn, config: PathConfig):
    chunks = config.chunks()
    if config.workers == 1:
        return [fn(n, gen) for n, gen in chunks]
    with concurrent.futures.ThreadPoolExecutor(config.workers) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def _euler_paths(process: GaussMarkovProcess, x: float, config: PathConfig, gen, n, upper, lower, record=None):
    """Euler-Maruyama for ``dY = drift(t, Y) dt + diffusion(t, Y) dW`` across ``n`` paths."""
    if process.drift is None or process.diffusion is None:
        raise BadParameter(f"{process.name}: Euler scheme needs drift and diffusion")
    dt = config.dt
    sq = math.sqrt(dt)
    y = np.full(n, float(process.y0))
    xv = np.full(n, float(x))
    tau = np.full(n, np.nan)
    side = np.zeros(n, dtype=np.int8)
    alive = np.ones(n, dtype=bool)
    rec_x = []
    rec_y = []
    if record is not None and record[0] >= 0:
        rec_x.append(xv.copy())
        rec_y.append(y.copy())
    for i in range(config.n_steps):
        t = i * dt
        z = gen.standard_normal(n)
        yn = y + process.drift(t, y) * dt + process.diffusion(t, y) * sq * z
        xv = xv + 0.5 * dt * (y + yn)
        y = yn
        if record is not None:
            if record[i + 1] >= 0:
                rec_x.append(xv.copy())
                rec_y.append(y.copy())
            continue
        hit_up = alive & (xv >= upper[i + 1])
        hit_lo = alive & (xv <= lower[i + 1])
        tau[hit_up | hit_lo] = (i + 1) * dt
        side[hit_up] = 1
        side[hit_lo] = -1
        alive &= ~(hit_up | hit_lo)
        if not alive.any():
            break
    if record is not None:
        return np.array(rec_x).T, np.array(rec_y).T
    return tau, side


# --------------------------------------------------------------------------
# simulation


def simulate_xy(
    process: GaussMarkovProcess,
    x: float,
    config: PathConfig,
    times: Sequence[float] | None = None,
) -> PathSample:
    """Sample ``(Y, X)`` for all ``config.n_paths`` paths.

    ``times`` selects the grid times to keep (snapped to the nearest grid
    point); ``None`` keeps the whole grid, which is only sensible for a few
    paths. Arrays have shape ``(n_paths, len(times))``.
    """
    t = _grid(process, config)
    idx = np.arange(t.size) if times is None else np.rint(np.asarray(times) / config.dt).astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= t.size):
        raise OutOfDomain("record times must lie in [0, t_max]")
    record = np.full(t.size, -1, dtype=np.int64)
    uniq = np.unique(idx)
    record[uniq] = np.arange(uniq.size)
    cols = record[idx]
    if config.scheme is Scheme.EULER:
        parts = _run_chunks(lambda n, gen: _euler_paths(process, x, config, gen, n, None, None, record), config)
    else:
        m, ratio, scale = _coefficients(process, t)
        y0 = float(process.y0)
        parts = _run_chunks(
            lambda n, gen: _record_kernel(gen, n, float(x), y0, m, ratio, scale, config.dt, record), config
        )
    xs = np.concatenate([p[0] for p in parts])[:, cols]
    ys = np.concatenate([p[1] for p in parts])[:, cols]
    return PathSample(t[idx], ys, xs)


def _boundary_arrays(process: GaussMarkovProcess, x: float, boundary, t: np.ndarray):
    inf = np.full(t.size, np.inf)
    if isinstance(boundary, Interval):
        if not boundary.a < x < boundary.b:
            raise OutOfInterval(f"x={x} outside ({boundary.a}, {boundary.b})")
        return np.full(t.size, boundary.b), np.full(t.size, boundary.a)
    if isinstance(boundary, (int, float)):
        boundary = ConstantBoundary(float(boundary))
    if isinstance(boundary, ConstantBoundary):
        boundary.distance(x)
        level = np.full(t.size, boundary.a)
        above = boundary.direction is Direction.FROM_ABOVE or (
            boundary.direction is Direction.HITTING and x > boundary.a
        )
        return (inf, level) if above else (level, -inf)
    if isinstance(boundary, LinearInRhoHat):
        rep = transform(process)
        curve = np.array([boundary.a + boundary.b * float(rep.rho_hat(s)) + rep.y * s for s in t])
    elif isinstance(boundary, (CubicIBM, GenericCurve)):
        fn = boundary.curve()
        curve = np.array([float(fn(s)) for s in t])
    else:
        raise BadParameter(f"unsupported boundary {boundary!r}")
    if x < curve[0]:
        return curve, -inf
    if x > curve[0]:
        return inf, curve
    raise BadParameter("start point lies on the boundary")


def simulate_fpt(process: GaussMarkovProcess, x: float, boundary, config: PathConfig):
    """Passage times (``nan`` when censored) and exit sides (``+1`` upper, ``-1`` lower).

    ``boundary`` is a level, a :class:`ConstantBoundary`, a moving boundary
    or an :class:`Interval`.
    """
    t = _grid(process, config)
    upper, lower = _boundary_arrays(process, float(x), boundary, t)
    if config.scheme is Scheme.EULER:
        parts = _run_chunks(lambda n, gen: _euler_paths(process, x, config, gen, n, upper, lower), config)
    else:
        m, ratio, scale = _coefficients(process, t)
        y0 = float(process.y0)
        parts = _run_chunks(
            lambda n, gen: _fpt_kernel(gen, n, float(x), y0, m, ratio, scale, upper, lower, config.dt), config
        )
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _summarize(values: np.ndarray, n_total: int, seed: int) -> McEstimate:
    n = values.size
    if n == 0:
        raise AllCensored("no path crossed before t_max")
    mean = math.fsum(values) / n
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return McEstimate(mean, se, n, 1.0 - n / n_total, seed)


def estimate_fpt(
    process: GaussMarkovProcess,
    x: float,
    boundary,
    config: PathConfig | None = None,
    p: float = 1.0,
) -> McEstimate:
    """Estimate ``E[tau^p]`` over paths that cross before ``t_max``.

    The velocity ``y`` is the process's own ``Y(0)``. Censored paths are
    dropped, so a heavy tail shows up as a large ``censored_fraction``
    and an estimate that grows with ``t_max``.

    Raises:
        AllCensored: no path crossed.
    """
    config = config or PathConfig()
    tau, _ = simulate_fpt(process, x, boundary, config)
    done = tau[~np.isnan(tau)]
    return _summarize(done**p, tau.size, config.seed)


def estimate_exit(
    process: GaussMarkovProcess,
    x: float,
    interval: Interval,
    config: PathConfig | None = None,
) -> ExitEstimate:
    """Exit time moments and exit-side frequencies for ``interval``."""
    config = config or PathConfig()
    tau, side = simulate_fpt(process, x, interval, config)
    ok = ~np.isnan(tau)
    done = tau[ok]
    mean = _summarize(done, tau.size, config.seed)
    second = _summarize(done**2, tau.size, config.seed)
    pi_b = float(np.mean(side[ok] == 1))
    pi_se = math.sqrt(max(pi_b * (1 - pi_b), 0.0) / done.size)
    return ExitEstimate(mean, second, 1.0 - pi_b, pi_b, pi_se, mean.censored_fraction)


def estimate_covariance(process: GaussMarkovProcess, x: float, s: float, t: float, config: PathConfig) -> McEstimate:
    """Sample ``cov(X(s), X(t))`` with a delta-method standard error."""
    sample = simulate_xy(process, x, config, times=[s, t])
    xs = sample.X[:, 0] - sample.X[:, 0].mean()
    xt = sample.X[:, 1] - sample.X[:, 1].mean()
    prod = xs * xt
    n = prod.size
    return McEstimate(float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n)), n, 0.0, config.seed)


def export_paths_csv(sample: PathSample, path, max_paths: int = 10) -> None:
    """Write ``path_id, t, Y, X`` rows for the first ``max_paths`` paths."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "t", "Y", "X"])
        for p in range(min(max_paths, sample.X.shape[0])):
            for i, ti in enumerate(sample.t):
                w.writerow([p, repr(float(ti)), repr(float(sample.Y[p, i])), repr(float(sample.X[p, i]))])


def diffusion_process(
    drift: Callable[[float, np.ndarray], np.ndarray],
    diffusion: Callable[[float, np.ndarray], np.ndarray],
    y0: float = 0.0,
    name: str = "diffusion",
) -> GaussMarkovProcess:
    """A process known only through its SDE, for the Euler scheme.

    The Gauss-Markov fields are placeholders that raise if used, so such a
    process cannot reach the analytic modules by accident.
    """

    def unavailable(t):
        raise BadParameter(f"{name}: not a Gauss-Markov process; simulate with Scheme.EULER")

    return GaussMarkovProcess(
        m=lambda t: y0 + 0.0 * np.asarray(t),
        h1=unavailable,
        h2=unavailable,
        rho=unavailable,
        rho_inv=unavailable,
        rho_prime=unavailable,
        name=name,
        drift=drift,
        diffusion=diffusion,
    )
