import math

import numpy as np
import pytest

from garmentsearch import colorstats as cs
from garmentsearch import gmm
from garmentsearch.query import And, Leaf, Or

from conftest import hsv_cluster, uniform_outliers


class TestFilterOutliers:
    def test_tau_infinity_is_identity(self):
        rng = np.random.default_rng(0)
        arr = hsv_cluster(rng, 120, 50)
        out = gmm.filter_outliers(arr, gmm.FilterConfig(tau=float("inf")))
        assert np.array_equal(out, arr)

    def test_removes_far_hue_pixel(self):
        rng = np.random.default_rng(1)
        inliers = hsv_cluster(rng, 120, 99, hue_sigma_deg=1.0, sv_sigma=1.0)
        outlier = np.array([[math.radians(300), 60.0, 70.0]])
        arr = np.vstack([inliers, outlier])
        kept = gmm.filter_outliers(arr, gmm.FilterConfig(tau=2.0))
        # oracle: recompute distances directly
        mom = cs.circular_moments(arr)
        dist = cs.mahalanobis_many(arr, mom.mean.as_array(), mom.cov)
        assert dist[-1] >= 2.0
        assert not any(np.allclose(outlier[0], row) for row in kept)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(2)
        arr = np.vstack([hsv_cluster(rng, 40, 80), uniform_outliers(rng, 20)])
        kept = gmm.filter_outliers(arr, gmm.FilterConfig(tau=2.0))
        mom = cs.circular_moments(arr)
        expected = [
            row for row in arr
            if cs.mahalanobis(cs.HsvPixel(*row), mom.mean, mom.cov) < 2.0
        ]
        assert np.allclose(kept, np.array(expected))

    def test_single_pixel_retained(self):
        arr = np.array([[1.0, 50.0, 50.0]])
        kept = gmm.filter_outliers(arr, gmm.FilterConfig(tau=2.0))
        assert np.array_equal(kept, arr)

    def test_monotone_in_tau(self):
        rng = np.random.default_rng(3)
        arr = np.vstack([hsv_cluster(rng, 200, 60), uniform_outliers(rng, 30)])
        sets = []
        for tau in (1.0, 2.0, 4.0):
            kept = gmm.filter_outliers(arr, gmm.FilterConfig(tau=tau))
            sets.append({tuple(row) for row in kept})
        assert sets[0] <= sets[1] <= sets[2]

    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            gmm.FilterConfig(tau=0.0)


class TestTrain:
    def test_single_gaussian_recovery(self):
        rng = np.random.default_rng(4)
        n = 2000
        sigma_deg = 3.0
        arr = hsv_cluster(rng, 80, n, hue_sigma_deg=sigma_deg)
        model = gmm.train([arr], gmm.FilterConfig(tau=float("inf")),
                          gmm.EmConfig(n_components=1, seed=0))
        assert model.n_components == 1
        got_deg = math.degrees(model.components[0].mean.h)
        tol = 3 * sigma_deg / math.sqrt(n)
        assert abs(got_deg - 80) < 3 * tol  # generous cover of the 3sigma/sqrt(n) bound

    def test_two_component_recovery(self):
        rng = np.random.default_rng(5)
        arr = np.vstack([hsv_cluster(rng, 30, 700), hsv_cluster(rng, 210, 300)])
        model = gmm.train([arr], gmm.FilterConfig(tau=float("inf")),
                          gmm.EmConfig(n_components=2, seed=1))
        comps = sorted(model.components, key=lambda c: c.weight)
        assert abs(cs.hue_delta(comps[0].mean.h, math.radians(210))) < math.radians(5)
        assert abs(cs.hue_delta(comps[1].mean.h, math.radians(30))) < math.radians(5)
        assert comps[0].weight == pytest.approx(0.3, abs=0.05)
        assert comps[1].weight == pytest.approx(0.7, abs=0.05)

    def test_identical_pixels_floor_covariance(self):
        arr = np.tile(np.array([[1.2, 40.0, 70.0]]), (30, 1))
        model = gmm.train([arr], gmm.FilterConfig(tau=float("inf")),
                          gmm.EmConfig(n_components=2, seed=0))
        assert model.n_components == 1
        comp = model.components[0]
        assert comp.mean.h == pytest.approx(1.2)
        assert np.allclose(comp.cov, 0.0, atol=1e-12)
        # regularized covariance still factorizable
        np.linalg.cholesky(cs.regularize(comp.cov))

    def test_weights_sum_to_one_and_cholesky(self):
        rng = np.random.default_rng(6)
        regions = [hsv_cluster(rng, 10, 200), hsv_cluster(rng, 20, 150)]
        model = gmm.train(regions, gmm.FilterConfig(tau=2.0), gmm.EmConfig(seed=2))
        assert sum(c.weight for c in model.components) == pytest.approx(1.0, abs=1e-9)
        for comp in model.components:
            np.linalg.cholesky(cs.regularize(comp.cov))

    def test_loglik_trace_nondecreasing(self):
        rng = np.random.default_rng(7)
        arr = np.vstack([hsv_cluster(rng, 100, 300), hsv_cluster(rng, 250, 300)])
        cfg = gmm.EmConfig(n_components=2, seed=3)
        _comps, _ll, trace = gmm._em_run(arr, cfg, np.random.default_rng(3))
        diffs = np.diff(trace)
        assert (diffs >= -1e-9).all()

    def test_insufficient_pixels(self):
        with pytest.raises(gmm.TrainingError):
            gmm.train([np.array([[1.0, 50.0, 50.0]])],
                      gmm.FilterConfig(tau=float("inf")),
                      gmm.EmConfig(n_components=2, seed=0))


class TestPixelLoglik:
    def _single_model(self, mean, cov, standard=False):
        return gmm.ColorModel(
            "test", "upper",
            (gmm.Component(1.0, mean, cov),),
            standard_mixture_loglik=standard,
        )

    def test_at_mean_identity_cov(self):
        mean = cs.HsvPixel(1.0, 50, 50)
        model = self._single_model(mean, np.eye(3))
        # log((2pi)^(-3/2)) with unit determinant
        assert gmm.pixel_loglik(mean, model) == pytest.approx(-2.75682, abs=1e-4)

    def test_single_component_is_gaussian_density(self):
        mean = cs.HsvPixel(2.0, 40, 60)
        cov = np.diag([0.5, 30.0, 40.0])
        model = self._single_model(mean, cov)
        p = cs.HsvPixel(2.2, 45, 55)
        d = cs.hsv_distance(p, mean).as_array()
        rcov = cs.regularize(cov)
        expected = (-1.5 * math.log(2 * math.pi) - 0.5 * math.log(np.linalg.det(rcov))
                    - 0.5 * d @ np.linalg.inv(rcov) @ d)
        assert gmm.pixel_loglik(p, model) == pytest.approx(expected, rel=1e-9)

    def test_identical_components_degenerate_to_single(self):
        mean = cs.HsvPixel(0.5, 60, 70)
        cov = np.diag([0.2, 10.0, 10.0])
        single = self._single_model(mean, cov)
        double = gmm.ColorModel(
            "test", "upper",
            (gmm.Component(0.5, mean, cov), gmm.Component(0.5, mean, cov)),
        )
        p = cs.HsvPixel(0.7, 55, 65)
        assert gmm.pixel_loglik(p, double) == pytest.approx(
            gmm.pixel_loglik(p, single), rel=1e-12)

    def test_standard_mixture_flag(self):
        mean_a = cs.HsvPixel(0.5, 60, 70)
        mean_b = cs.HsvPixel(3.5, 40, 30)
        cov = np.diag([0.2, 10.0, 10.0])
        comps = (gmm.Component(0.5, mean_a, cov), gmm.Component(0.5, mean_b, cov))
        verbatim = gmm.ColorModel("t", "upper", comps)
        standard = gmm.ColorModel("t", "upper", comps, standard_mixture_loglik=True)
        p = cs.HsvPixel(0.5, 60, 70)
        # log of mixture >= weighted sum of logs (Jensen)
        assert gmm.pixel_loglik(p, standard) > gmm.pixel_loglik(p, verbatim)


class TestRegionScore:
    def _model(self):
        return gmm.ColorModel(
            "t", "upper",
            (gmm.Component(1.0, cs.HsvPixel(1.0, 50, 50), np.diag([0.1, 25.0, 25.0])),),
        )

    def test_identical_pixels(self):
        model = self._model()
        p = cs.HsvPixel(1.1, 52, 48)
        region = np.tile(p.as_array(), (20, 1))
        assert gmm.region_score(region, model) == pytest.approx(
            math.exp(gmm.pixel_loglik(p, model)), rel=1e-12)

    def test_far_region_tiny_score(self):
        model = self._model()
        region = np.tile(cs.HsvPixel(1.0, 50, 100).as_array(), (10, 1))
        # 50 units of V at sigma 5 -> 10 Mahalanobis units
        assert gmm.region_score(region, model) < 1e-8

    def test_duplication_invariance(self):
        rng = np.random.default_rng(8)
        region = hsv_cluster(rng, 57, 40)
        model = self._model()
        s1 = gmm.region_score(region, model)
        s2 = gmm.region_score(np.vstack([region, region]), model)
        assert s2 == pytest.approx(s1, rel=1e-12)

    def test_hue_rotation_invariance(self):
        rng = np.random.default_rng(9)
        train_px = hsv_cluster(rng, 120, 300)
        test_px = hsv_cluster(rng, 100, 60)
        cfg = gmm.EmConfig(n_components=2, seed=4, restarts=2)
        base_model = gmm.train([train_px], gmm.FilterConfig(tau=2.0), cfg)
        base = gmm.region_score(test_px, base_model)
        for delta in rng.uniform(0, 2 * np.pi, 10):
            tr = train_px.copy()
            tr[:, 0] = np.mod(tr[:, 0] + delta, 2 * np.pi)
            te = test_px.copy()
            te[:, 0] = np.mod(te[:, 0] + delta, 2 * np.pi)
            model = gmm.train([tr], gmm.FilterConfig(tau=2.0), cfg)
            assert gmm.region_score(te, model) == pytest.approx(base, rel=1e-6)


class TestCombine:
    def test_and_sums_logs(self):
        a, b = Leaf("upper", "a"), Leaf("lower", "b")
        scores = {a: math.exp(-1), b: math.exp(-2)}
        assert gmm.combine(And((a, b)), scores) == pytest.approx(-3.0)

    def test_or_takes_max(self):
        a, b = Leaf("upper", "a"), Leaf("lower", "b")
        scores = {a: math.exp(-1), b: math.exp(-2)}
        assert gmm.combine(Or((a, b)), scores) == pytest.approx(-1.0)

    def test_leaf_is_log(self):
        a = Leaf("upper", "a")
        assert gmm.combine(a, {a: 0.25}) == pytest.approx(math.log(0.25))

    def test_missing_leaf_errors(self):
        with pytest.raises(KeyError):
            gmm.combine(Leaf("upper", "a"), {})

    def test_and_ranking_invariant_to_scale(self):
        a, b = Leaf("upper", "a"), Leaf("lower", "b")
        q = And((a, b))
        samples = [{a: 0.5, b: 0.01}, {a: 0.2, b: 0.2}, {a: 0.9, b: 0.001}]
        base = [gmm.combine(q, s) for s in samples]
        scaled = [gmm.combine(q, {k: 7.3 * v for k, v in s.items()}) for s in samples]
        assert np.argsort(base).tolist() == np.argsort(scaled).tolist()


class TestPersistence:
    def test_bit_compatible_reload(self, tmp_path):
        rng = np.random.default_rng(10)
        regions = [hsv_cluster(rng, 300, 200), hsv_cluster(rng, 310, 150)]
        model = gmm.train(regions, gmm.FilterConfig(tau=2.0),
                          gmm.EmConfig(seed=5), label="violet", garment="upper")
        path = tmp_path / "model.json"
        gmm.save(model, path)
        loaded = gmm.load(path)
        assert loaded.label == "violet"
        test_px = hsv_cluster(rng, 305, 50)
        assert gmm.region_score(test_px, loaded) == pytest.approx(
            gmm.region_score(test_px, model), abs=1e-9, rel=1e-9)
