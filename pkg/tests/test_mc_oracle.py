import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from igmfpt.errors import AllCensored, BadParameter, OutOfDomain, OutOfInterval, PreconditionError
from igmfpt.fpt_double import Interval
from igmfpt.fpt_single import ConstantBoundary, CubicIBM, Direction
from igmfpt.gm_core import builtin_brownian_bridge, builtin_integrated_bm, builtin_ou, integrated_bm_covariance
from igmfpt.mc_oracle import (
    PathConfig,
    Scheme,
    diffusion_process,
    estimate_covariance,
    estimate_exit,
    estimate_fpt,
    export_paths_csv,
    simulate_fpt,
    simulate_xy,
)


def z_two(a, se_a, b, se_b):
    return abs(a - b) / math.hypot(se_a, se_b)


class TestPathConfig:
    def test_steps(self):
        assert PathConfig(dt=1e-2, t_max=3.0).n_steps == 300

    def test_chunks(self):
        sizes = [n for n, _ in PathConfig(n_paths=25, chunk_size=10).chunks()]
        assert sizes == [10, 10, 5]

    @pytest.mark.parametrize("kw", [dict(dt=0.0), dict(dt=2.0, t_max=1.0), dict(n_paths=0), dict(workers=0)])
    def test_bad(self, kw):
        with pytest.raises(BadParameter):
            PathConfig(**kw)


class TestReproducibility:
    cfg = PathConfig(dt=1e-2, t_max=5.0, n_paths=3000, chunk_size=1000, seed=11)

    def test_same_seed(self, ibm):
        a, _ = simulate_fpt(ibm, 0.0, 1.0, self.cfg)
        b, _ = simulate_fpt(ibm, 0.0, 1.0, self.cfg)
        np.testing.assert_array_equal(a, b)

    def test_other_seed(self, ibm):
        a, _ = simulate_fpt(ibm, 0.0, 1.0, self.cfg)
        b, _ = simulate_fpt(ibm, 0.0, 1.0, replace(self.cfg, seed=12))
        assert not np.array_equal(a, b, equal_nan=True)

    def test_workers(self, ibm):
        a = simulate_xy(ibm, 0.0, self.cfg, times=[1.0, 2.0]).X
        b = simulate_xy(ibm, 0.0, replace(self.cfg, workers=3), times=[1.0, 2.0]).X
        np.testing.assert_array_equal(a, b)


class TestMarginals:
    cfg = PathConfig(dt=1e-2, t_max=2.0, n_paths=40_000, seed=3)

    def test_ibm_moments(self, ibm):
        s = simulate_xy(ibm, 0.5, self.cfg, times=[1.0, 2.0])
        n = s.X.shape[0]
        assert abs(s.X[:, 0].mean() - 0.5) < 4 * math.sqrt(1 / 3 / n)
        v = s.X[:, 0].var(ddof=1)
        assert abs(v - 1 / 3) < 4 * (1 / 3) * math.sqrt(2 / n)
        assert abs(s.Y[:, 1].var(ddof=1) - 2.0) < 4 * 2.0 * math.sqrt(2 / n)

    def test_ibm_velocity_start(self):
        s = simulate_xy(builtin_integrated_bm(0.5), 0.0, self.cfg, times=[2.0])
        assert abs(s.X[:, 0].mean() - 1.0) < 4 * math.sqrt(8 / 3 / s.X.shape[0])

    def test_ibm_covariance(self, ibm):
        est = estimate_covariance(ibm, 0.0, 1.0, 2.0, self.cfg)
        assert integrated_bm_covariance(1.0, 2.0) == pytest.approx(5 / 6)
        assert est.within(5 / 6, 4)

    def test_ou_velocity(self):
        ou = builtin_ou(1.5, beta=0.2, y=1.0)
        s = simulate_xy(ou, 0.0, self.cfg, times=[1.0])
        mean = 0.2 + 0.8 * math.exp(-1.5)
        var = (1 - math.exp(-3.0)) / 3.0
        n = s.Y.shape[0]
        assert abs(s.Y[:, 0].mean() - mean) < 4 * math.sqrt(var / n)
        assert abs(s.Y[:, 0].var(ddof=1) - var) < 4 * var * math.sqrt(2 / n)

    def test_grid_times(self, ibm):
        s = simulate_xy(ibm, 0.0, PathConfig(dt=0.5, t_max=2.0, n_paths=3))
        np.testing.assert_allclose(s.t, [0, 0.5, 1.0, 1.5, 2.0])
        assert s.X.shape == (3, 5)
        np.testing.assert_array_equal(s.X[:, 0], 0.0)

    def test_times_outside(self, ibm):
        with pytest.raises(OutOfDomain):
            simulate_xy(ibm, 0.0, PathConfig(dt=0.1, t_max=1.0, n_paths=2), times=[2.0])

    def test_euler_agrees(self, ou):
        exact = simulate_xy(ou, 0.0, PathConfig(dt=1e-2, t_max=2.0, n_paths=20_000, seed=5), times=[2.0]).X[:, 0]
        euler = simulate_xy(
            ou, 0.0, PathConfig(dt=1e-2, t_max=2.0, n_paths=20_000, seed=6, scheme=Scheme.EULER), times=[2.0]
        ).X[:, 0]
        se = math.sqrt(exact.var() / exact.size)
        assert abs(exact.mean() - euler.mean()) < 4 * math.sqrt(2) * se
        assert euler.var() == pytest.approx(exact.var(), rel=0.05)

    def test_generic_diffusion(self):
        bm = diffusion_process(lambda t, y: 0.0 * y, lambda t, y: 1.0 + 0.0 * y)
        cfg = PathConfig(dt=1e-2, t_max=1.0, n_paths=20_000, seed=7, scheme=Scheme.EULER)
        x = simulate_xy(bm, 0.0, cfg, times=[1.0]).X[:, 0]
        assert abs(x.var(ddof=1) - 1 / 3) < 4 * (1 / 3) * math.sqrt(2 / x.size)

    def test_generic_needs_euler(self):
        bm = diffusion_process(lambda t, y: 0.0 * y, lambda t, y: 1.0 + 0.0 * y)
        with pytest.raises(BadParameter):
            simulate_xy(bm, 0.0, PathConfig(dt=0.1, t_max=1.0, n_paths=2), times=[1.0])

    def test_horizon(self):
        with pytest.raises(OutOfDomain):
            simulate_xy(builtin_brownian_bridge(1.0), 0.0, PathConfig(dt=0.01, t_max=1.5, n_paths=2))


class TestPassage:
    def test_dt_halving(self, ibm):
        # crossings are detected at grid points; the hit probability by t = 1 barely moves with dt
        est = []
        for dt in (2e-3, 1e-3):
            tau, _ = simulate_fpt(ibm, 0.0, 0.5, PathConfig(dt=dt, t_max=1.0, n_paths=40_000, seed=21))
            p = float(np.mean(~np.isnan(tau)))
            est.append((p, math.sqrt(p * (1 - p) / tau.size)))
        assert abs(est[0][0] - est[1][0]) < 0.01

    def test_velocity_speeds_passage(self):
        cfg = PathConfig(dt=1e-2, t_max=20.0, n_paths=5000, seed=4)
        fast = estimate_fpt(builtin_integrated_bm(1.0), 0.0, 1.0, cfg)
        slow = estimate_fpt(builtin_integrated_bm(-1.0), 0.0, 1.0, cfg)
        assert fast.mean < slow.mean

    def test_from_above(self, ibm):
        cfg = PathConfig(dt=1e-2, t_max=5.0, n_paths=4000, seed=9)
        up = estimate_fpt(ibm, 0.0, 1.0, cfg)
        down = estimate_fpt(ibm, 0.0, ConstantBoundary(-1.0, Direction.FROM_ABOVE), cfg)
        assert z_two(up.mean, up.std_error, down.mean, down.std_error) < 4

    def test_censoring_grows_tail(self, ou):
        short = estimate_fpt(ou, 0.0, 1.0, PathConfig(dt=1e-2, t_max=10.0, n_paths=4000, seed=2))
        long = estimate_fpt(ou, 0.0, 1.0, PathConfig(dt=1e-2, t_max=80.0, n_paths=4000, seed=2))
        assert long.censored_fraction < short.censored_fraction
        assert long.mean > short.mean

    def test_all_censored(self, ibm):
        with pytest.raises(AllCensored):
            estimate_fpt(ibm, 0.0, 100.0, PathConfig(dt=1e-2, t_max=1.0, n_paths=100))

    def test_cubic_boundary(self, ibm):
        tau, _ = simulate_fpt(ibm, 0.0, CubicIBM(1.0, 0.0, -0.5), PathConfig(dt=1e-2, t_max=3.0, n_paths=2000))
        assert np.all(np.isfinite(tau))

    def test_start_on_boundary(self, ibm):
        with pytest.raises(PreconditionError):
            simulate_fpt(ibm, 1.0, 1.0, PathConfig(dt=0.1, t_max=1.0, n_paths=2))


class TestExit:
    def test_symmetry(self, ibm, unit):
        cfg = PathConfig(dt=1e-3, t_max=50.0, n_paths=8000, seed=31)
        right = estimate_exit(ibm, 0.3, unit, cfg)
        left = estimate_exit(ibm, -0.3, unit, cfg)
        assert right.pi_a + right.pi_b == pytest.approx(1.0)
        assert abs(right.pi_b - left.pi_a) < 4 * math.sqrt(2) * right.pi_std_error
        assert z_two(right.mean.mean, right.mean.std_error, left.mean.mean, left.mean.std_error) < 4

    def test_second_moment_exceeds_square(self, ou, unit):
        est = estimate_exit(ou, 0.0, unit, PathConfig(dt=1e-3, t_max=50.0, n_paths=4000, seed=32))
        assert est.second_moment.mean > est.mean.mean**2
        assert est.censored_fraction == 0.0

    def test_outside(self, ibm, unit):
        with pytest.raises(OutOfInterval):
            estimate_exit(ibm, 2.0, unit, PathConfig(dt=0.1, t_max=1.0, n_paths=2))


class TestExport:
    def test_csv(self, ibm, tmp_path):
        s = simulate_xy(ibm, 0.0, PathConfig(dt=0.25, t_max=1.0, n_paths=12, seed=1))
        out = tmp_path / "paths.csv"
        export_paths_csv(s, out)
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["path", "t", "Y", "X"]
        assert len(rows) == 1 + 10 * 5
        back = np.array([float(r[3]) for r in rows[1:] if r[0] == "3"])
        np.testing.assert_array_equal(back, s.X[3])
