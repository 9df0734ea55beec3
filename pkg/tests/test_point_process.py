"""Point-process samplers: distributional oracles, determinism, serialization."""

import math

import numpy as np
import pytest

from dilute_homog import (PointSample, TorusSpec, analytic_lambda2,
                          sample_jittered_lattice, sample_matern2,
                          sample_poisson)
from dilute_homog.errors import ConfigError, DomainError
from dilute_homog.point_process import (ProcessSpec, ball_volume, intensity,
                                        matern2_retained_intensity)


class TestTorusSpec:
    def test_rejects_bad_dimension(self):
        with pytest.raises(ConfigError):
            TorusSpec(1, 64.0)
        with pytest.raises(ConfigError):
            TorusSpec(4, 64.0)

    def test_rejects_small_box(self):
        with pytest.raises(ConfigError):
            TorusSpec(2, 7.9)

    def test_volume(self):
        assert TorusSpec(3, 16.0).volume == 4096.0


class TestProcessSpec:
    def test_validation(self):
        with pytest.raises(ConfigError):
            ProcessSpec("poisson", intensity=0.0)
        with pytest.raises(ConfigError):
            ProcessSpec("matern2", parent_intensity=-1.0, r_hard=1.0)
        with pytest.raises(ConfigError):
            ProcessSpec("jittered_lattice", spacing=8.0, jitter=4.0)
        with pytest.raises(ConfigError):
            ProcessSpec("binomial")

    def test_jitter_range_is_half_open(self):
        ProcessSpec("jittered_lattice", spacing=8.0, jitter=0.0)
        ProcessSpec("jittered_lattice", spacing=8.0, jitter=3.999)


class TestPoisson:
    def test_mean_count_oracle(self):
        # lam = 0.01, L = 64, d = 2: expected count 40.96; Monte Carlo over
        # 10^4 seeds must land in [39, 43] (3 sigma is about +-1.9 here)
        torus = TorusSpec(2, 64.0)
        counts = [len(sample_poisson(0.01, torus, seed)) for seed in range(10_000)]
        mean = float(np.mean(counts))
        assert 39.0 <= mean <= 43.0
        sigma = math.sqrt(40.96 / 10_000)
        assert abs(mean - 40.96) <= 3 * sigma * 2  # extra slack for seed choice

    def test_determinism(self):
        torus = TorusSpec(2, 64.0)
        a = sample_poisson(0.02, torus, 7)
        b = sample_poisson(0.02, torus, 7)
        assert np.array_equal(a.centers, b.centers)
        c = sample_poisson(0.02, torus, 8)
        assert not np.array_equal(a.centers, c.centers)

    def test_positions_in_box(self):
        torus = TorusSpec(3, 16.0)
        s = sample_poisson(0.02, torus, 3)
        assert s.centers.min() >= 0.0
        assert s.centers.max() < 16.0
        assert s.centers.shape[1] == 3

    def test_resource_guard(self):
        with pytest.raises(ConfigError):
            sample_poisson(1e6, TorusSpec(2, 1024.0), 0)

    def test_rejects_nonpositive_intensity(self):
        with pytest.raises(DomainError):
            sample_poisson(0.0, TorusSpec(2, 64.0), 0)

    def test_stationarity_quadrant_counts(self):
        # counts in the four congruent quadrants are exchangeable: a
        # chi-square test on the pooled quadrant totals at the 1% level
        from scipy.stats import chisquare

        torus = TorusSpec(2, 64.0)
        totals = np.zeros(4)
        for seed in range(1000):
            s = sample_poisson(0.01, torus, 10_000 + seed)
            q = (s.centers[:, 0] >= 32.0).astype(int) * 2 \
                + (s.centers[:, 1] >= 32.0).astype(int)
            totals += np.bincount(q, minlength=4)
        assert chisquare(totals).pvalue > 0.01

    def test_intensity_consistency(self):
        # empirical intensity within 5% of lam at lam L^d >= 10^3
        torus = TorusSpec(2, 64.0)
        lam = 0.25
        counts = [len(sample_poisson(lam, torus, 20_000 + s)) for s in range(100)]
        emp = np.mean(counts) / torus.volume
        assert abs(emp - lam) / lam < 0.05


class TestMatern2:
    def test_hardcore_always(self):
        torus = TorusSpec(2, 64.0)
        for seed in range(20):
            s = sample_matern2(0.1, 3.0, torus, seed)
            if len(s) < 2:
                continue
            diff = s.centers[:, None, :] - s.centers[None, :, :]
            diff -= 64.0 * np.round(diff / 64.0)
            d2 = (diff ** 2).sum(axis=2)
            np.fill_diagonal(d2, np.inf)
            assert d2.min() >= 3.0 ** 2

    def test_retained_intensity_oracle(self):
        # closed form (1 - exp(-lam_p V_h)) / V_h against a Monte Carlo mean
        torus = TorusSpec(2, 64.0)
        lam_p, r_hard = 0.05, 2.0
        expected = matern2_retained_intensity(lam_p, r_hard, 2) * torus.volume
        counts = np.array([len(sample_matern2(lam_p, r_hard, torus, 1000 + s))
                           for s in range(200)])
        se = counts.std(ddof=1) / math.sqrt(len(counts))
        assert abs(counts.mean() - expected) <= 3 * se

    def test_retained_intensity_formula(self):
        vh = ball_volume(2.0, 2)
        assert vh == pytest.approx(4 * math.pi, rel=1e-14)
        lam = matern2_retained_intensity(0.05, 2.0, 2)
        assert lam == pytest.approx(-math.expm1(-0.05 * vh) / vh, rel=1e-14)

    def test_wide_hardcore_gives_singletons(self):
        from dilute_homog import cluster_decomposition

        torus = TorusSpec(2, 64.0)
        for seed in range(10):
            s = sample_matern2(0.1, 4.0, torus, seed)
            assert all(len(c) == 1 for c in cluster_decomposition(s))

    def test_rejects_bad_params(self):
        torus = TorusSpec(2, 64.0)
        with pytest.raises(DomainError):
            sample_matern2(0.1, 0.0, torus, 0)
        with pytest.raises(DomainError):
            sample_matern2(-0.1, 1.0, torus, 0)


class TestJitteredLattice:
    def test_exact_lattice(self):
        torus = TorusSpec(2, 64.0)
        s = sample_jittered_lattice(8.0, 0.0, torus, 0)
        assert len(s) == 64
        from dilute_homog import min_separation
        assert min_separation(s) == pytest.approx(8.0, abs=1e-12)

    def test_count_is_cells(self):
        torus = TorusSpec(3, 16.0)
        s = sample_jittered_lattice(8.0, 1.0, torus, 5)
        assert len(s) == 8

    def test_jitter_bound_on_separation(self):
        # a = 8, eta = 1: adjacent points are at Euclidean distance >= 6
        torus = TorusSpec(2, 64.0)
        for seed in range(10):
            s = sample_jittered_lattice(8.0, 1.0, torus, seed)
            diff = s.centers[:, None, :] - s.centers[None, :, :]
            diff -= 64.0 * np.round(diff / 64.0)
            d = np.sqrt((diff ** 2).sum(axis=2))
            np.fill_diagonal(d, np.inf)
            assert d.min() >= 6.0

    def test_rejects_incommensurate_spacing(self):
        with pytest.raises(ConfigError):
            sample_jittered_lattice(7.0, 0.0, TorusSpec(2, 64.0), 0)


class TestAnalyticLambda2:
    def test_poisson_square(self):
        assert analytic_lambda2(ProcessSpec("poisson", intensity=0.02)) \
            == pytest.approx(4e-4, rel=1e-14)

    def test_poisson_range(self):
        # lam^2 <= lambda2 <= lam for every dilute intensity
        for lam in (1e-4, 1e-3, 1e-2, 1e-1, 0.5):
            v = analytic_lambda2(ProcessSpec("poisson", intensity=lam))
            assert lam ** 2 <= v <= lam

    def test_lattice_zero(self):
        spec = ProcessSpec("jittered_lattice", spacing=8.0, jitter=0.0)
        assert analytic_lambda2(spec) == 0.0

    def test_matern_unknown(self):
        spec = ProcessSpec("matern2", parent_intensity=0.1, r_hard=2.0)
        assert analytic_lambda2(spec) is None

    def test_intensity_helper(self):
        assert intensity(ProcessSpec("poisson", intensity=0.3), 2) == 0.3
        assert intensity(ProcessSpec("jittered_lattice", spacing=8.0), 2) \
            == pytest.approx(1 / 64, rel=1e-14)


class TestSerialization:
    def test_round_trip_exact(self):
        torus = TorusSpec(2, 64.0)
        s = sample_poisson(0.02, torus, 11)
        t = PointSample.from_text(s.to_text())
        assert t.torus == s.torus
        assert t.seed == s.seed
        assert t.process == s.process
        assert np.array_equal(t.centers, s.centers)

    def test_round_trip_matern(self):
        s = sample_matern2(0.05, 2.0, TorusSpec(3, 16.0), 4)
        t = PointSample.from_text(s.to_text())
        assert t.process.r_hard == 2.0
        assert np.array_equal(t.centers, s.centers)

    def test_missing_header(self):
        with pytest.raises(ConfigError):
            PointSample.from_text("1.0 2.0\n")

    def test_rejects_out_of_box_centers(self):
        torus = TorusSpec(2, 64.0)
        proc = ProcessSpec("poisson", intensity=0.01)
        with pytest.raises(ConfigError):
            PointSample(torus, np.array([[65.0, 1.0]]), 0, proc)
