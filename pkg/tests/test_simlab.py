import io

import numpy as np
import pytest
from scipy import stats

from adaptomo.likelihoods import NoiseModel, outcome_probs
from adaptomo.qubit import MeasurementConfig, QubitState
from adaptomo.simlab import Apparatus, PilotEstimationError, event_line, read_event_log


def apparatus(s=(0.0, 0.0, 1.0), noise=NoiseModel(), seed=0, log=None):
    return Apparatus(QubitState.from_vector(s), noise, np.random.default_rng(seed), log)


class TestDrawBlock:
    def test_certain_outcome(self):
        counts = apparatus().draw_block(MeasurementConfig.along((0, 0, 1)), 100)
        assert counts.counts == (100, 0)

    def test_unbiased_axis(self):
        k = 100_000
        c = apparatus(seed=1).draw_block(MeasurementConfig.along((1, 0, 0)), k)
        assert abs(c.counts[0] / k - 0.5) < 5 * np.sqrt(0.25 / k)

    def test_dark_count_fraction(self):
        k = 100_000
        noise = NoiseModel.with_dark_counts(1000, (5, 15))
        c = apparatus((0, 0, 0.8), noise, seed=2).draw_block(MeasurementConfig.along((0, 0, 1)), k)
        p = (900 + 5) / 1020
        assert p == pytest.approx(0.8873, abs=1e-4)
        assert abs(c.counts[0] / k - p) < 5 * np.sqrt(p * (1 - p) / k)

    def test_binomial_agreement(self):
        # many small blocks: the outcome-0 counts follow Binomial(k, p)
        noise = NoiseModel(100.0, (3.0, 1.0), (0.7, 1.0), True, True)
        app = apparatus((0.3, -0.2, 0.5), noise, seed=3)
        cfg = MeasurementConfig.along((0.0, 0.6, 0.8))
        p = outcome_probs(app.true_state, cfg.povm, noise)[0]
        draws = [app.draw_block(cfg, 20).counts[0] for _ in range(5000)]
        observed = np.bincount(draws, minlength=21)
        expected = 5000 * stats.binom.pmf(np.arange(21), 20, p)
        keep = expected > 5
        chi2 = np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep])
        assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-3

    def test_sum_and_step_count(self):
        app = apparatus((0.1, 0.2, 0.3), seed=4)
        for k in (1, 5, 17):
            assert app.draw_block(MeasurementConfig.along((0, 1, 0)), k).total == k
        assert app.n == 23

    @pytest.mark.parametrize("k", [0, -1, 2.5])
    def test_invalid_block(self, k):
        with pytest.raises(ValueError):
            apparatus().draw_block(MeasurementConfig.along((0, 0, 1)), k)

    def test_seeded_determinism(self):
        cfg = MeasurementConfig.along((0.6, 0.0, 0.8))
        a, b = apparatus((0.2, 0.2, 0.2), seed=9), apparatus((0.2, 0.2, 0.2), seed=9)
        assert [a.draw_block(cfg, 50) for _ in range(5)] == [b.draw_block(cfg, 50) for _ in range(5)]


class TestEventLog:
    def test_round_trip(self):
        buf = io.StringIO()
        app = apparatus((0.3, 0.3, 0.3), seed=5, log=buf)
        cfgs = [MeasurementConfig.along((0, 0, 1)), MeasurementConfig.from_waveplates(10.0, 20.0)]
        drawn = [app.draw_block(c, k) for c, k in zip(cfgs, (3, 8))]
        header, events = read_event_log(io.StringIO(buf.getvalue()))
        assert header == {}
        assert [e[1] for e in events] == drawn
        assert events[1][0].waveplate_angles == (10.0, 20.0)
        assert np.allclose(events[1][0].axis, cfgs[1].axis, atol=0)

    def test_field_order(self):
        line = event_line(4, MeasurementConfig.along((1, 0, 0)), apparatus().draw_block(MeasurementConfig.along((1, 0, 0)), 4))
        assert line.startswith('{"step": 4, "axis": [1.0, 0.0, 0.0], "waveplate_angles": null, "k": 4, "counts": [')

    def test_inconsistent_record(self):
        bad = '{"step": 1, "axis": [0, 0, 1], "waveplate_angles": null, "k": 3, "counts": [1, 1]}'
        with pytest.raises(ValueError):
            read_event_log([bad])


class TestPilot:
    def test_closed_loop(self):
        noise = NoiseModel(1000.0, (10.0, 10.0), (0.8, 1.0), True, True)
        est = apparatus(noise=noise, seed=6).pilot_estimate(1e6, 1e6)
        for r, se in zip(est.dark_ratios, est.dark_ratio_se):
            assert abs(r - 0.01) < 3 * se
        assert abs(est.efficiency_ratio - 0.8) < 3 * est.efficiency_ratio_se

    def test_zero_dark_rates(self):
        est = apparatus(noise=NoiseModel.with_efficiencies((0.9, 1.0)), seed=7).pilot_estimate(1e5, 1e5)
        assert est.dark_ratios == (0.0, 0.0)
        assert all(se > 0 for se in est.dark_ratio_se)

    def test_equal_efficiencies(self):
        est = apparatus(noise=NoiseModel.with_dark_counts(1000, (1, 2)), seed=8).pilot_estimate(1e5, 1e5)
        assert abs(est.efficiency_ratio - 1.0) < 3 * est.efficiency_ratio_se

    def test_estimated_model_reproduces_probs(self):
        noise = NoiseModel(1000.0, (10.0, 30.0), (0.8, 1.0), True, True)
        est = apparatus(noise=noise, seed=9).pilot_estimate(1e7, 1e7).noise_model()
        s = QubitState(0.1, 0.5, -0.3)
        cfg = MeasurementConfig.along((0, 0, 1))
        assert np.allclose(outcome_probs(s, cfg.povm, est), outcome_probs(s, cfg.povm, noise), atol=2e-3)

    def test_no_signal(self):
        noise = NoiseModel(1.0, (0.0, 0.0), (1e-9, 1e-9), True, True)
        with pytest.raises(PilotEstimationError):
            apparatus(noise=noise, seed=10).pilot_estimate(10, 10)
