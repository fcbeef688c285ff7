import math

import numpy as np
import pytest

from mochlab.errors import ParameterError
from mochlab.estimates import (
    COMMUTATOR_IDS,
    PRODUCT_IDS,
    REPORT_COLUMNS,
    SWEEP_COLUMNS,
    EstimateReport,
    commutator_check,
    fit_exponent,
    inflation_csv,
    lemma212_scaling_sweep,
    low_frequency_fraction,
    mechanism_at,
    product_estimate_check,
    random_bandlimited,
    resample,
    run_ensemble,
    run_inflation,
)
from mochlab.grid import RealField, make_grid
from mochlab.initial_data import datum_for
from mochlab.littlewood_paley import block, build_partition

from .oracles import phi_closed

# largest (2.11) ratio over two disjoint 100-member ensembles (seeds 1, 2)
ENSEMBLE_211_CONSTANT = 0.34


def cos32(grid):
    return RealField.from_function(grid, lambda x: np.cos(32 * x))


@pytest.fixture(scope="module")
def g256():
    return make_grid(256)


@pytest.fixture(scope="module")
def p256(g256):
    return build_partition(g256)


class TestEstimateReport:
    def test_ratio(self):
        assert EstimateReport("2.6", 1.0, 4.0).ratio == 0.25

    def test_degenerate(self):
        r = EstimateReport("2.6", 0.0, 0.0)
        assert r.degenerate and r.ratio == 0.0
        assert EstimateReport("2.6", 1.0, 0.0).ratio == math.inf


class TestResample:
    def test_round_trip(self, g256, rng):
        u = random_bandlimited(g256, rng, max_band=30)
        up = resample(u, make_grid(1024))
        np.testing.assert_allclose(resample(up, g256).samples, u.samples, atol=1e-13)
        np.testing.assert_allclose(up.samples[::4], u.samples, atol=1e-13)

    def test_band_too_wide(self, g256, rng):
        u = random_bandlimited(g256, rng, max_band=100)
        with pytest.raises(ParameterError):
            resample(u, make_grid(64))


class TestProductEstimates:
    def test_zero(self, p256, g256):
        reps = product_estimate_check(p256, RealField(g256, np.zeros(256)))
        assert [r.lemma_id for r in reps] == list(PRODUCT_IDS)
        assert all(r.lhs == 0 and r.degenerate for r in reps)

    def test_cos32_oracle(self, p256, g256):
        reps = {r.lemma_id: r for r in product_estimate_check(p256, cos32(g256), 1.0)}
        a = phi_closed(1.0) + phi_closed(2.0)
        w = max((j + 2) ** 2 * phi_closed(32 / 2**j) for j in (4, 5))
        assert reps["2.8"].lhs <= 2.0
        assert reps["2.8"].lhs == pytest.approx(1.0, abs=1e-10)
        assert reps["2.8"].rhs == pytest.approx(a * w, rel=1e-10)
        assert all(math.isfinite(r.ratio) for r in reps.values())

    def test_translation_invariance(self, p256, g256, rng):
        u = random_bandlimited(g256, rng)
        a = [r.ratio for r in product_estimate_check(p256, u)]
        b = [r.ratio for r in product_estimate_check(p256, u.shifted(37))]
        np.testing.assert_allclose(a, b, rtol=1e-10)

    @pytest.mark.parametrize("c", [0.1, 3.0, -7.0])
    def test_square_scaling(self, p256, g256, rng, c):
        u = random_bandlimited(g256, rng)
        r1 = {r.lemma_id: r for r in product_estimate_check(p256, u)}
        r2 = {r.lemma_id: r for r in product_estimate_check(p256, c * u)}
        for k in ("2.8", "2.9"):
            assert r2[k].lhs == pytest.approx(c * c * r1[k].lhs, rel=1e-10)
            assert r2[k].ratio == pytest.approx(r1[k].ratio, rel=1e-10)

    def test_grid_mismatch(self, p256):
        with pytest.raises(ParameterError):
            product_estimate_check(p256, cos32(make_grid(128)))

    def test_lambda_zero(self, p256, g256):
        with pytest.raises(ParameterError):
            product_estimate_check(p256, cos32(g256), 0.0)


class TestCommutator:
    def test_constant(self, p256, g256):
        res = commutator_check(p256, RealField(g256, np.full(256, 1.7)))
        assert res.R.total <= 1e-14
        assert res.R_tilde.total <= 1e-14

    def test_profiles_consistent(self, p256, g256, rng):
        res = commutator_check(p256, random_bandlimited(g256, rng))
        for prof in (res.R, res.R_tilde, res.R_tilde_display):
            assert np.all(prof.sup_norms >= 0)
            assert prof.total == pytest.approx(prof.sup_norms.sum())
            w = np.max((prof.j_values + 2.0) ** 2 * prof.sup_norms)
            assert prof.weighted_sup == pytest.approx(w)
        assert [r.lemma_id for r in res.reports] == list(COMMUTATOR_IDS)

    def test_two_evaluation_paths(self, rng):
        g = make_grid(64)
        p = build_partition(g)
        u = random_bandlimited(g, rng, max_band=6)
        a = commutator_check(p, u, method="fft")
        b = commutator_check(p, u, method="convolution")
        for pa, pb in ((a.R, b.R), (a.R_tilde, b.R_tilde)):
            scale = max(pa.sup_norms.max(), 1.0)
            np.testing.assert_allclose(pa.sup_norms, pb.sup_norms, atol=1e-12 * scale)

    def test_single_block(self, rng):
        g = make_grid(1024)
        p = build_partition(g)
        j0 = 4
        u = block(p, RealField(g, rng.normal(size=1024)), j0)
        res = commutator_check(p, u)
        vals = res.R.sup_norms
        scale = vals.max()
        for j, val in zip(res.R.j_values, vals):
            if j > j0 + 4:
                assert val <= 1e-12 * scale
        assert math.isfinite(res.R.total)

    def test_translation_invariance(self, p256, g256, rng):
        u = random_bandlimited(g256, rng)
        a = [r.ratio for r in commutator_check(p256, u).reports]
        b = [r.ratio for r in commutator_check(p256, u.shifted(101)).reports]
        np.testing.assert_allclose(a, b, rtol=1e-10)

    def test_unknown_method(self, p256, g256):
        with pytest.raises(ParameterError):
            commutator_check(p256, cos32(g256), method="magic")


class TestEnsembles:
    def test_random_field_is_band_limited(self, g256, rng):
        u = random_bandlimited(g256, rng)
        k = np.flatnonzero(np.abs(u.spectrum) > 1e-12 * np.abs(u.spectrum).max())
        assert k.max() <= 256 // 8

    def test_reproducible(self):
        a = run_ensemble("2.13", 5, seed=11)
        b = run_ensemble("2.13", 5, seed=11)
        assert [r.ratio for r in a.reports] == [r.ratio for r in b.reports]

    def test_small_ensembles_finite(self):
        for lemma in ("2.13", "2.14"):
            s = run_ensemble(lemma, 8, seed=5)
            assert all(math.isfinite(s.max_ratio(i)) for i in s.ids())

    @pytest.mark.parametrize("kw", [{"lemma": "2.15"}, {"size": 0}])
    def test_rejects(self, kw):
        args = {"lemma": "2.13", "size": 3, "seed": 1, **kw}
        with pytest.raises(ParameterError):
            run_ensemble(**args)

    @pytest.mark.slow
    def test_inflation_datum_commutator(self):
        part, d = datum_for(8)
        rep = {r.lemma_id: r for r in commutator_check(part, d.gamma0).reports}
        assert rep["2.11"].ratio <= ENSEMBLE_211_CONSTANT


class TestSweep:
    def test_fit_exponent(self):
        ns = [2, 4, 8]
        assert fit_exponent(ns, [3 * n**0.7 for n in ns]) == pytest.approx(0.7)

    def test_fit_needs_two(self):
        with pytest.raises(ParameterError):
            fit_exponent([3], [1.0])

    def test_empty(self):
        with pytest.raises(ParameterError):
            lemma212_scaling_sweep([])

    def test_bad_corrector(self):
        with pytest.raises(ParameterError):
            lemma212_scaling_sweep([6], corrector="weird")

    def test_small_sweep(self):
        t = lemma212_scaling_sweep([6, 7])
        assert t.column("N").tolist() == [6, 7]
        assert set(t.exponents) == {"norm_B0inf1", "norm_weighted", "norm_square_B0inf1", "ratio"}
        lines = t.to_csv().splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert lines[1].startswith("6,")

    def test_low_fraction_pure_mode(self, p256, g256):
        # cos 32x lives in blocks 4 and 5
        assert low_frequency_fraction(p256, cos32(g256), 5) == pytest.approx(1.0)
        assert low_frequency_fraction(p256, cos32(g256), 3) <= 1e-13


class TestMechanism:
    @pytest.fixture(scope="class")
    @staticmethod
    def mech6():
        part, d = datum_for(6)
        return mechanism_at(part, d.gamma0, 1.0, j_cut=8)

    def test_bounds_ordered(self, mech6):
        assert mech6.lagrangian_bound <= mech6.triangle_bound
        assert 0 < mech6.source_share < 1

    def test_low_band_budget(self, mech6):
        assert mech6.j_cut == 8
        # net transport is negligible below the carrier band
        assert mech6.low_flux <= 1e-3 * mech6.low_source
        assert mech6.low_total <= mech6.low_source + mech6.low_linear + mech6.low_flux

    def test_no_cut(self):
        g = make_grid(256)
        m = mechanism_at(build_partition(g), cos32(g), 1.0)
        assert m.j_cut is None and math.isnan(m.low_source)


@pytest.mark.slow
class TestInflationRun:
    @pytest.fixture(scope="class")
    @staticmethod
    def report6():
        return run_inflation(6, records=10)

    def test_fields(self, report6):
        r = report6
        assert r.T == 6**-0.5
        assert r.amplification >= 1 - 1e-12
        assert r.steps * r.dt == pytest.approx(r.T, rel=1e-12)
        assert r.times[-1] == pytest.approx(r.T, rel=1e-12)
        assert not r.truncated

    def test_slope_within_bound(self, report6):
        m = report6.mechanism
        assert report6.initial_slope <= m.lagrangian_bound
        assert report6.low_slope >= 0.1 * m.low_source

    def test_csv(self, report6):
        text = inflation_csv([report6])
        head, row = text.splitlines()
        assert head == ",".join(REPORT_COLUMNS)
        assert row.startswith("6,")
        assert len(row.split(",")) == len(REPORT_COLUMNS)
