import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coverimpact.errors import ImpactError, ParameterError
from coverimpact.impact import (
    ImpactConfig,
    ImpactReport,
    effect_quantiles,
    run_impact,
    summarize,
    tail_probability,
)
from coverimpact.series import CoverageSeries


def trend_series(n, seed, slope=0.01, obs_sd=0.005, level_sd=0.002, slope_sd=0.0005, level=0.6):
    """Local-linear-trend data; the default scales keep the noise far below 0.1."""
    rng = np.random.default_rng(seed)
    y = np.zeros(n)
    for t in range(n):
        y[t] = level + rng.normal(0, obs_sd)
        level += slope + rng.normal(0, level_sd)
        slope += rng.normal(0, slope_sd)
    return y


class TestEffectQuantiles:
    def test_hand_example(self):
        lo, med, hi = effect_quantiles(np.array([1, 2, 3, 4, 5.0]), 0.5)
        assert (lo[0], med[0], hi[0]) == (2.0, 3.0, 4.0)

    def test_identical_draws(self):
        lo, med, hi = effect_quantiles(np.full((7, 3), 2.5), 0.9)
        assert np.all(lo == med) and np.all(med == hi)

    def test_gaussian_quantiles(self):
        lo, _, hi = effect_quantiles(np.random.default_rng(0).standard_normal(10_000), 0.95)
        assert abs(lo[0] + 1.96) <= 0.08 and abs(hi[0] - 1.96) <= 0.08

    def test_interpolation_between_order_statistics(self):
        # 4 draws, level 0.5: positions 0.75 and 2.25 on the sorted sample
        lo, _, hi = effect_quantiles(np.array([0.0, 10.0, 20.0, 40.0]), 0.5)
        assert lo[0] == pytest.approx(7.5) and hi[0] == pytest.approx(25.0)

    @pytest.mark.parametrize("draws,level", [(np.zeros(1), 0.9), (np.zeros((0, 3)), 0.9), (np.zeros(5), 1.0)])
    def test_invalid(self, draws, level):
        with pytest.raises(ParameterError):
            effect_quantiles(draws, level)


class TestSummarize:
    @given(
        arrays(np.float64, (20, 5), elements=st.floats(-10, 10)),
        arrays(np.float64, 5, elements=st.floats(20, 30)),
    )
    @settings(max_examples=50, deadline=None)
    def test_band_invariants(self, pred, observed):
        pred = pred + 25.0
        cf, point, cum, avg, total, rel, p = summarize(observed, pred, 0.9)
        for band in (cf, point, cum):
            assert np.all(band.lower <= band.upper)
            assert np.all(band.lower <= band.mean + 1e-9) and np.all(band.mean <= band.upper + 1e-9)
        assert np.allclose(point.mean, observed - cf.mean)
        assert np.allclose(cum.mean, np.cumsum(point.mean))
        assert 0.0 <= p <= 0.5

    def test_nonnegative_effects_give_nondecreasing_cumulative(self):
        rng = np.random.default_rng(1)
        observed = np.full(6, 5.0)
        pred = observed - rng.uniform(0, 1, (50, 6))
        _, _, cum, *_ = summarize(observed, pred, 0.95)
        assert np.all(np.diff(cum.mean) >= 0) and np.all(np.diff(cum.lower) >= 0)

    def test_per_draw_consistency(self):
        rng = np.random.default_rng(2)
        observed = np.zeros(5)
        pred = rng.normal(size=(200, 5))
        effects = observed - pred
        cumulative = np.cumsum(effects, axis=1)
        assert np.array_equal(np.all(np.diff(cumulative, axis=1) >= 0, axis=1), np.all(effects[:, 1:] >= 0, axis=1))
        _, _, cum, *_ = summarize(observed, pred, 0.95)
        assert np.allclose(cum.mean, cumulative.mean(axis=0))

    def test_relative_guard(self):
        pred = np.array([[1.0, -1.0], [-1.0, 1.0]])
        with pytest.raises(ImpactError):
            summarize(np.zeros(2), pred, 0.95)


class TestTailProbability:
    def test_negative_median(self):
        assert tail_probability([-3, -2, -1, 1]) == 0.25

    def test_positive_median(self):
        assert tail_probability([3, 2, 1, -1, -2]) == 0.4


class TestRunImpact:
    @pytest.fixture(scope="class")
    @staticmethod
    def base():
        y = trend_series(30, seed=1)
        series = CoverageSeries.from_values(y, 1984)
        cfg = ImpactConfig(20, "local_linear_trend", n_iter=1000, burn_in=200, seed=7)
        return series, cfg, run_impact(series, cfg)

    def test_report_shape(self, base):
        series, cfg, rep = base
        assert rep.intervention_epoch == 2003
        assert rep.epochs.tolist() == list(range(2004, 2014))
        assert rep.n_draws == 800
        assert np.allclose(rep.point_effect.mean, rep.observed - rep.counterfactual.mean)

    def test_determinism(self, base):
        series, cfg, rep = base
        again = run_impact(series, cfg)
        assert again.to_json() == rep.to_json()

    def test_json_roundtrip(self, base):
        _, _, rep = base
        d = json.loads(rep.to_json())
        assert ImpactReport.from_dict(d).to_json() == rep.to_json()
        assert set(d["summary"]) == {"average_effect", "cumulative_effect", "relative_effect", "tail_probability"}

    def test_csv(self, base):
        _, _, rep = base
        lines = rep.to_csv().splitlines()
        assert lines[0].startswith("epoch,observed,counterfactual_mean")
        assert len(lines) == 11

    def test_zero_effect_construction(self, base):
        series, cfg, rep = base
        values = series.values.copy()
        values[20:] = rep.counterfactual.mean
        zero = run_impact(CoverageSeries(series.epochs, values), cfg)
        assert np.allclose(zero.point_effect.mean, 0.0, atol=1e-12)
        assert abs(zero.average_effect.mean[0]) < 1e-12
        assert zero.average_effect.lower[0] < 0 < zero.average_effect.upper[0]
        assert abs(zero.tail_probability - 0.5) < 0.1

    def test_translation_equivariance(self, base):
        series, cfg, rep = base
        shifted = run_impact(CoverageSeries(series.epochs, series.values + 3.0), cfg)
        assert np.allclose(shifted.counterfactual.mean, rep.counterfactual.mean + 3.0, atol=1e-6)
        assert np.allclose(shifted.point_effect.mean, rep.point_effect.mean, atol=1e-6)
        assert np.allclose(shifted.cumulative_effect.lower, rep.cumulative_effect.lower, atol=1e-6)

    def test_local_level_component(self):
        y = np.random.default_rng(3).normal(0.5, 0.01, 25)
        rep = run_impact(CoverageSeries.from_values(y), ImpactConfig(15, "local_level", n_iter=300, burn_in=100, seed=0))
        assert rep.component == "local_level"
        assert rep.cumulative_effect.lower[-1] < 0 < rep.cumulative_effect.upper[-1]

    @pytest.mark.slow
    def test_injected_step_recovered(self):
        delta = 0.1
        hits = 0
        for seed in range(50):
            # no drift: a strong deterministic trend inflates var(pre), and with
            # it the default prior scale on the state variances
            y = trend_series(40, seed=seed, slope=0.0)
            y[30:] -= delta
            rep = run_impact(CoverageSeries.from_values(y), ImpactConfig(30, n_iter=2000, burn_in=500, seed=seed))
            avg = rep.average_effect
            hits += abs(avg.mean[0] + delta) <= 0.25 * delta and avg.upper[0] < 0
        assert hits >= 40

    def test_intervention_too_early(self):
        with pytest.raises(ParameterError):
            ImpactConfig(2)

    def test_no_post_period(self):
        with pytest.raises(ParameterError):
            run_impact(CoverageSeries.from_values(np.arange(5.0)), ImpactConfig(5))

    def test_constant_pre_period(self):
        y = np.array([0.5] * 6 + [0.4, 0.3])
        with pytest.raises(ImpactError):
            run_impact(CoverageSeries.from_values(y), ImpactConfig(6, n_iter=20, burn_in=5))

    def test_credible_level(self):
        with pytest.raises(ParameterError):
            ImpactConfig(5, credible_level=1.0)
