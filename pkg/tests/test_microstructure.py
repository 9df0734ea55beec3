"""Inclusion geometry: separations, clusters, rasterization, lambda2."""

import math

import numpy as np
import pytest

from dilute_homog import (GridField, InclusionSet, PhaseModel, TorusSpec,
                          cluster_decomposition, estimate_lambda2,
                          geometry_report, min_separation, rasterize,
                          rho_separations, sample_jittered_lattice,
                          sample_matern2, sample_poisson, volume_fraction)
from dilute_homog import backend
from dilute_homog.errors import ConfigError, DomainError
from dilute_homog.point_process import PointSample, ProcessSpec

from conftest import brute_force_clusters


def _sample_from(centers, torus):
    proc = ProcessSpec("poisson", intensity=0.01)
    return PointSample(torus, np.asarray(centers, dtype=float), 0, proc)


class TestMinSeparation:
    def test_lattice(self):
        s = sample_jittered_lattice(8.0, 0.0, TorusSpec(2, 64.0), 0)
        assert min_separation(s) == pytest.approx(8.0, abs=1e-12)

    def test_two_points_sup_norm(self):
        s = _sample_from([[0.0, 0.0], [5.0, 1.0]], TorusSpec(2, 64.0))
        assert min_separation(s) == pytest.approx(5.0, abs=1e-12)

    def test_matern_norm_conversion(self):
        # sup-norm distance >= Euclidean / sqrt(d)
        for seed in range(5):
            s = sample_matern2(0.1, 3.0, TorusSpec(2, 64.0), seed)
            if len(s) >= 2:
                assert min_separation(s) >= 3.0 / math.sqrt(2) - 1e-12

    def test_degenerate_counts(self):
        t = TorusSpec(2, 64.0)
        assert min_separation(_sample_from(np.empty((0, 2)), t)) == math.inf
        assert min_separation(_sample_from([[1.0, 1.0]], t)) == math.inf

    def test_wraparound(self):
        s = _sample_from([[1.0, 0.0], [63.0, 0.0]], TorusSpec(2, 64.0))
        assert min_separation(s) == pytest.approx(2.0, abs=1e-12)


class TestRhoSeparations:
    def test_pair_at_six(self):
        s = _sample_from([[10.0, 10.0], [16.0, 10.0]], TorusSpec(2, 64.0))
        rho = rho_separations(s)
        assert np.allclose(rho, 3.0)
        assert (rho >= 2.0).all()

    def test_pair_below_threshold(self):
        s = _sample_from([[10.0, 10.0], [13.9, 10.0]], TorusSpec(2, 64.0))
        rho = rho_separations(s)
        assert np.allclose(rho, 1.95)
        assert not (rho >= 2.0).any()

    def test_lattice(self):
        s = sample_jittered_lattice(8.0, 0.0, TorusSpec(2, 64.0), 0)
        assert np.allclose(rho_separations(s), 4.0)

    def test_monotone_under_insertion(self):
        # adding a point never increases any existing rho_n
        t = TorusSpec(2, 64.0)
        base = sample_poisson(0.01, t, 3)
        rho0 = rho_separations(base)
        rng = np.random.default_rng(5)
        for _ in range(10):
            extra = rng.uniform(0, 64.0, size=(1, 2))
            grown = _sample_from(np.vstack([base.centers, extra]), t)
            rho1 = rho_separations(grown)[:len(base)]
            assert (rho1 <= rho0 + 1e-12).all()


class TestClusters:
    def test_chain_merges(self):
        pts = [[10.0 + 3.5 * k, 10.0] for k in range(5)]
        s = _sample_from(pts, TorusSpec(2, 64.0))
        assert cluster_decomposition(s) == [[0, 1, 2, 3, 4]]

    def test_matern_wide_hardcore_singletons(self):
        for seed in range(5):
            s = sample_matern2(0.1, 4.2, TorusSpec(2, 64.0), seed)
            assert all(len(c) == 1 for c in cluster_decomposition(s))

    def test_against_brute_force_oracle(self, sample_corpus):
        for s in sample_corpus[:60]:
            assert cluster_decomposition(s) == brute_force_clusters(s)

    def test_partition(self, sample_corpus):
        for s in sample_corpus:
            clusters = cluster_decomposition(s)
            flat = sorted(i for c in clusters for i in c)
            assert flat == list(range(len(s)))

    def test_singleton_iff_rho(self, sample_corpus):
        # paper's equivalence: singleton cluster <=> rho_n >= 2
        for s in sample_corpus:
            rho = rho_separations(s)
            for c in cluster_decomposition(s):
                for i in c:
                    assert (len(c) == 1) == (rho[i] >= 2.0)

    def test_never_splits_under_insertion(self):
        t = TorusSpec(2, 64.0)
        base = sample_poisson(0.05, t, 9)
        before = cluster_decomposition(base)
        grown = _sample_from(np.vstack([base.centers, [[32.0, 32.0]]]), t)
        after = cluster_decomposition(grown)
        membership = {}
        for q, c in enumerate(after):
            for i in c:
                membership[i] = q
        for c in before:
            assert len({membership[i] for i in c}) == 1

    def test_translation_invariance(self):
        t = TorusSpec(2, 64.0)
        s = sample_poisson(0.05, t, 21)
        shift = np.array([13.7, 41.2])
        moved = _sample_from((s.centers + shift) % 64.0, t)
        assert min_separation(moved) == pytest.approx(min_separation(s),
                                                      rel=1e-12)
        assert np.allclose(np.sort(rho_separations(moved)),
                           np.sort(rho_separations(s)), rtol=1e-12)
        sizes = sorted(len(c) for c in cluster_decomposition(s))
        sizes_m = sorted(len(c) for c in cluster_decomposition(moved))
        assert sizes == sizes_m


class TestVolumeFraction:
    def test_empty(self):
        t = TorusSpec(2, 64.0)
        incl = InclusionSet(_sample_from(np.empty((0, 2)), t))
        assert volume_fraction(incl, method="raster", N=256) == 0.0

    def test_single_disk_area(self):
        t = TorusSpec(2, 64.0)
        incl = InclusionSet(_sample_from([[32.0, 32.0]], t))
        phi = volume_fraction(incl, method="raster", N=1024)
        exact = math.pi / 64.0 ** 2
        assert abs(phi - exact) / exact < 0.02

    def test_disjoint_union_additivity(self):
        # phi ~ (count / L^d) |B| for non-overlapping inclusions
        t = TorusSpec(2, 64.0)
        s = sample_matern2(0.05, 4.0, t, 2)
        phi = volume_fraction(InclusionSet(s), method="raster", N=1024)
        exact = len(s) * math.pi / t.volume
        assert abs(phi - exact) / exact < 0.02

    def test_montecarlo_agrees_with_raster(self):
        t = TorusSpec(2, 64.0)
        s = sample_poisson(0.02, t, 6)
        incl = InclusionSet(s)
        phi_r = volume_fraction(incl, method="raster", N=2048)
        phi_mc = volume_fraction(incl, method="montecarlo", M=200_000, seed=1)
        se = math.sqrt(phi_r * (1 - phi_r) / 200_000)
        assert abs(phi_mc - phi_r) < 4 * se + 1e-3

    def test_montecarlo_deterministic(self):
        t = TorusSpec(2, 64.0)
        incl = InclusionSet(sample_poisson(0.02, t, 6))
        a = volume_fraction(incl, method="montecarlo", M=1000, seed=3)
        b = volume_fraction(incl, method="montecarlo", M=1000, seed=3)
        assert a == b

    def test_bad_method(self):
        incl = InclusionSet(sample_poisson(0.02, TorusSpec(2, 64.0), 0))
        with pytest.raises(ConfigError):
            volume_fraction(incl, method="quadrature")


class TestRasterize:
    def test_empty_is_background(self):
        t = TorusSpec(2, 16.0)
        fld = rasterize(InclusionSet(_sample_from(np.empty((0, 2)), t)),
                        PhaseModel.isotropic(1.0, 2.0, 2), 128)
        assert fld.mask.sum() == 0
        assert fld.phi_raster() == 0.0

    def test_phi_consistency_exact(self):
        t = TorusSpec(2, 64.0)
        s = sample_poisson(0.02, t, 6)
        fld = rasterize(InclusionSet(s), PhaseModel.isotropic(1.0, 2.0, 2), 512)
        assert fld.phi_raster() == volume_fraction(InclusionSet(s),
                                                   method="raster", N=512)

    def test_first_order_convergence(self):
        # single inclusion centered on a grid node, d = 2, L = 16:
        # raster phi converges to pi/256 roughly linearly in h
        t = TorusSpec(2, 16.0)
        incl = InclusionSet(_sample_from([[8.0, 8.0]], t))
        exact = math.pi / 256.0
        errs = []
        for N in (256, 512, 1024):
            phi = volume_fraction(incl, method="raster", N=N)
            errs.append(abs(phi - exact))
        assert errs[2] < errs[0]
        assert errs[2] < 0.01 * exact

    def test_resolution_guard(self):
        t = TorusSpec(2, 64.0)
        incl = InclusionSet(sample_poisson(0.01, t, 0))
        with pytest.raises(ConfigError):
            rasterize(incl, PhaseModel.isotropic(1.0, 2.0, 2), 128)  # h = 0.5

    def test_raster_periodic_wrap(self):
        # inclusion near the boundary must wrap around
        t = TorusSpec(2, 16.0)
        fld = rasterize(InclusionSet(_sample_from([[0.2, 8.0]], t)),
                        PhaseModel.isotropic(1.0, 2.0, 2), 128)
        assert fld.mask[-1, :].sum() > 0 and fld.mask[0, :].sum() > 0

    def test_dump_load_round_trip(self, tmp_path):
        t = TorusSpec(2, 16.0)
        fld = rasterize(InclusionSet(_sample_from([[8.0, 8.0]], t)),
                        PhaseModel.isotropic(1.0, 3.0, 2), 128)
        path = tmp_path / "field.bin"
        fld.dump(path)
        back = GridField.load(path)
        assert back.N == fld.N and back.torus == fld.torus
        assert np.array_equal(back.mask, fld.mask)
        assert np.array_equal(back.phases.A1, fld.phases.A1)

    def test_load_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b'{"magic": "OTHER"}\n')
        with pytest.raises(ConfigError):
            GridField.load(path)


class TestLambda2Estimator:
    def test_poisson_oracle(self):
        # ensemble estimate within [0.8, 1.2] of lam^2
        t = TorusSpec(2, 128.0)
        lam = 0.02
        samples = [sample_poisson(lam, t, 4000 + s) for s in range(100)]
        est = estimate_lambda2(samples, bin_width=1.0)
        assert 0.8 <= est.value / lam ** 2 <= 1.2
        assert not est.bound_violated

    def test_intensity_bound(self):
        t = TorusSpec(2, 64.0)
        samples = [sample_poisson(0.05, t, 6000 + s) for s in range(50)]
        est = estimate_lambda2(samples, bin_width=1.0)
        assert est.value <= est.lambda_hat + 3e-3
        assert est.value >= 0.05 ** 2 * 0.5

    def test_lattice_off_bins_empty(self):
        # deterministic lattice: only bins whose corner sits on a lattice
        # displacement carry pair mass
        t = TorusSpec(2, 32.0)
        s = sample_jittered_lattice(8.0, 0.0, t, 0)
        width, rmax = 2.0, 8.0
        nb = 2 * int(rmax / width)
        hist = np.zeros((nb,) * 2, dtype=np.int64)
        backend.pair_disp_hist(s.centers, 32.0, width, rmax, hist)
        assert hist.sum() > 0
        corners = (np.arange(nb) - nb // 2) * width
        for b in np.argwhere(hist > 0):
            for j in range(2):
                assert corners[b[j]] in (-8.0, 0.0, 8.0)

    def test_empty_ensemble_raises(self):
        with pytest.raises(DomainError):
            estimate_lambda2([])

    def test_needs_bin_width(self):
        t = TorusSpec(2, 64.0)
        with pytest.raises(ConfigError):
            estimate_lambda2([sample_poisson(0.01, t, 0)])

    def test_ell_override(self):
        t = TorusSpec(2, 64.0)
        samples = [sample_jittered_lattice(8.0, 0.0, t, s) for s in range(12)]
        with pytest.warns(UserWarning, match="cutoff"):
            est = estimate_lambda2(samples, ell=8.0)
        assert est.bin_width == 8.0


class TestGeometryReport:
    def test_fields_consistent(self):
        s = sample_poisson(0.02, TorusSpec(2, 64.0), 14)
        rep = geometry_report(s)
        assert rep.n_points == len(s)
        assert 0.0 <= rep.phi_hat <= 1.0
        assert rep.n_singletons == sum(1 for c in rep.clusters if len(c) == 1)
        assert rep.n_singletons == int((rep.rho >= 2.0).sum())

    def test_text_and_csv(self):
        s = sample_poisson(0.02, TorusSpec(2, 64.0), 14)
        rep = geometry_report(s)
        text = rep.to_text()
        for key in ("n_points", "ell_hat", "rho_min", "n_clusters", "phi_hat"):
            assert key in text
        row = rep.to_csv_row()
        assert len(row.split(",")) == len(rep.CSV_COLUMNS)
