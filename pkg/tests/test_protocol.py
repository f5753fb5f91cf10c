"""Tests of protocol iteration, diagnostics traces, and asymptotics."""

import numpy as np
import pytest

from conftest import total_variation
from gaussify.errors import VanishingSuccessError
from gaussify.protocol import (
    AsymptotePrediction,
    ProtocolConfig,
    ehd_reduction_factor,
    predict_asymptote,
    predict_asymptote_via_covariance,
    run_protocol,
    success_bounds,
    total_success_probability,
)
from gaussify.states import make_custom, make_poisson, make_thermal
from oracles import heralded_trajectory, random_distribution


def heralded_config(state, eta, iters, **kw):
    return ProtocolConfig(input_state=state, detector_eta=eta, iterations=iters,
                          mode="heralded", **kw)


class TestConfigValidation:
    def test_mode_checked(self):
        with pytest.raises(ValueError):
            ProtocolConfig(input_state=make_poisson(1.0), mode="sideways")

    def test_iteration_bound(self):
        with pytest.raises(ValueError):
            ProtocolConfig(input_state=make_poisson(1.0), iterations=13)
        ProtocolConfig(input_state=make_poisson(1.0), iterations=13, max_iterations=13)

    def test_cap_acknowledgment(self):
        state = make_poisson(1.0)
        with pytest.raises(ValueError):
            ProtocolConfig(input_state=state, iterations=8, trunc_cap=state.n_max + 1,
                           acknowledge_truncation=False)
        ProtocolConfig(input_state=state, iterations=8, trunc_cap=state.n_max + 1,
                       acknowledge_truncation=True)

    def test_eta_checked(self):
        with pytest.raises(ValueError):
            ProtocolConfig(input_state=make_poisson(1.0), detector_eta=1.3)


class TestRunProtocol:
    def test_thermal_input_is_stationary(self):
        state = make_thermal(1.0, trunc_tol=1e-14, max_photons=400)
        trace = run_protocol(heralded_config(state, 0.4, 4))
        for rec in trace.records:
            assert total_variation(rec.state, state) < 1e-9
            assert abs(rec.kurtosis) < 1e-9

    def test_heralded_means_match_series_oracle(self):
        # completely independent dynamics check: the attenuated-picture
        # closed-form iteration must reproduce the engine's mean trajectory
        state = make_poisson(0.9, trunc_tol=1e-15)
        trace = run_protocol(heralded_config(state, 0.4, 6))
        expected_means, expected_probs = heralded_trajectory(state.probs, 0.4, 6)
        means = [rec.mean for rec in trace.records[1:]]
        probs = [rec.p_succ for rec in trace.records[1:]]
        np.testing.assert_allclose(means, expected_means, rtol=1e-8)
        np.testing.assert_allclose(probs, expected_probs, rtol=1e-9)

    def test_convergent_run_approaches_asymptote(self):
        state = make_poisson(0.75, trunc_tol=1e-15)
        trace = run_protocol(heralded_config(state, 1.0, 10))
        means = np.array([rec.mean for rec in trace.records])
        gaps = np.abs(means - 3.0)
        assert np.all(np.diff(gaps) < 0)
        # the exact trajectory sits 1.14% away after ten iterations
        assert trace.records[-1].mean == pytest.approx(2.96578, abs=2e-4)

    def test_divergent_run_grows(self):
        state = make_poisson(1.25, trunc_tol=1e-13)
        trace = run_protocol(heralded_config(state, 1.0, 6))
        means = [rec.mean for rec in trace.records]
        assert all(b > a for a, b in zip(means, means[1:]))

    def test_deterministic_mean_constant(self):
        state = make_poisson(1.1, trunc_tol=1e-14)
        trace = run_protocol(ProtocolConfig(input_state=state, iterations=5,
                                            mode="deterministic"))
        for rec in trace.records:
            assert rec.mean == pytest.approx(1.1, abs=1e-10)
            assert rec.p_succ == 1.0

    @pytest.mark.parametrize("make_state", [
        lambda: make_poisson(1.0, trunc_tol=1e-15),
        lambda: make_poisson(3.0, trunc_tol=1e-15),
        lambda: make_custom([0.15, 0.3, 0.2, 0.2, 0.1, 0.05]),
    ])
    def test_deterministic_kurtosis_halving(self, make_state):
        state = make_state()
        trace = run_protocol(ProtocolConfig(input_state=state, iterations=6,
                                            mode="deterministic", trunc_tol=1e-16))
        k0 = trace.records[0].kurtosis
        for rec in trace.records:
            assert rec.kurtosis == pytest.approx(k0 / 2.0 ** rec.j, rel=1e-9)

    def test_total_success_identity(self):
        state = make_poisson(0.9, trunc_tol=1e-14)
        trace = run_protocol(heralded_config(state, 0.4, 5))
        steps = trace.step_probabilities()
        recombined = total_success_probability(steps, log=True)
        assert trace.log_p_tot == pytest.approx(recombined, rel=1e-12)
        # cumulative column is self-consistent at every prefix
        for j in range(1, 6):
            assert trace.records[j].log_p_tot == pytest.approx(
                total_success_probability(steps[:j], log=True), rel=1e-12)

    def test_success_floor_raises(self):
        state = make_poisson(0.5)
        config = heralded_config(state, 1.0, 3, success_floor=0.9)
        with pytest.raises(VanishingSuccessError):
            run_protocol(config)

    def test_cap_saturation_reported(self):
        state = make_poisson(2.0, trunc_tol=1e-12)
        config = heralded_config(state, 0.45, 4, trunc_cap=state.n_max + 4)
        trace = run_protocol(config)
        assert trace.cap_saturated
        assert trace.records[-1].tail_mass > 0.0

    def test_snapshot_count(self):
        trace = run_protocol(heralded_config(make_poisson(0.4), 1.0, 3))
        assert [rec.j for rec in trace.records] == [0, 1, 2, 3]


class TestAsymptotePredictions:
    def test_poisson_closed_form(self):
        for mu, eta in [(0.75, 1.0), (0.5, 0.8), (2.4, 0.4)]:
            state = make_poisson(mu, trunc_tol=1e-15)
            pred = predict_asymptote(state, eta)
            assert pred.converges
            assert pred.mean_photons == pytest.approx(mu / (1 - eta * mu), rel=1e-9)

    def test_poisson_threshold_boundary_diverges(self):
        state = make_poisson(2.5, trunc_tol=1e-15)
        assert predict_asymptote(state, 0.4) == AsymptotePrediction(converges=False)

    def test_poisson_above_threshold_diverges(self):
        state = make_poisson(1.25, trunc_tol=1e-13)
        assert not predict_asymptote(state, 1.0).converges

    def test_custom_two_level(self):
        pred = predict_asymptote(make_custom([0.7, 0.3]), 1.0)
        assert pred.mean_photons == pytest.approx(0.75, rel=1e-12)

    def test_eta_zero_rejected(self):
        with pytest.raises(ValueError):
            predict_asymptote(make_poisson(0.5), 0.0)

    def test_covariance_route_agrees(self, rng):
        checked = 0
        while checked < 200:
            state = make_custom(random_distribution(rng))
            eta = 0.05 + 0.9 * rng.random()
            pred = predict_asymptote(state, eta)
            if not pred.converges or pred.mean_photons < 1e-6:
                continue
            via_cov = predict_asymptote_via_covariance(state, eta)
            assert via_cov == pytest.approx(pred.mean_photons, rel=1e-9)
            checked += 1

    def test_covariance_route_thermal_fixed_point(self):
        state = make_thermal(0.8, trunc_tol=1e-15)
        assert predict_asymptote_via_covariance(state, 0.5) == pytest.approx(0.8, rel=1e-9)

    def test_covariance_route_continuity_at_perfect_detection(self):
        state = make_poisson(0.75, trunc_tol=1e-15)
        assert predict_asymptote_via_covariance(state, 1 - 1e-9) == pytest.approx(
            3.0, rel=1e-6)
        with pytest.raises(ValueError):
            predict_asymptote_via_covariance(state, 1.0)

    def test_covariance_route_divergent_rejected(self):
        state = make_poisson(3.0, trunc_tol=1e-13)
        with pytest.raises(ValueError):
            predict_asymptote_via_covariance(state, 0.9)


class TestSuccessProbabilities:
    def test_bounds_cases(self):
        assert success_bounds(0.0, 0.7) == (1.0, 1.0)
        lo, hi = success_bounds(1.0, 0.4)
        assert lo == pytest.approx(0.6)
        assert hi == pytest.approx(1 / 1.4)
        lo, hi = success_bounds(2.5, 0.4)
        assert lo == 0.0
        assert hi == pytest.approx(0.5)

    @pytest.mark.parametrize("mu,eta", [(0.25, 1.0), (0.5, 1.0), (1.0, 0.4), (2.0, 0.4)])
    def test_step_probabilities_inside_band(self, mu, eta):
        state = make_poisson(mu, trunc_tol=1e-14)
        trace = run_protocol(heralded_config(state, eta, 6))
        lo, hi = success_bounds(mu, eta)
        for p in trace.step_probabilities():
            assert lo - 1e-9 <= p <= hi + 1e-9

    @pytest.mark.parametrize("mu,eta", [(0.5, 1.0), (0.25, 1.0), (0.5, 0.4), (1.25, 0.4)])
    def test_small_intensity_gap_after_ten_iterations(self, mu, eta):
        # relative distance to the asymptote is below 2% by N=10 whenever
        # the attenuated intensity stays at or below one half
        state = make_poisson(mu, trunc_tol=1e-14)
        trace = run_protocol(heralded_config(state, eta, 10))
        target = mu / (1.0 - eta * mu)
        assert abs(trace.records[-1].mean - target) / target < 0.02

    @pytest.mark.parametrize("mu", [0.25, 0.5])
    @pytest.mark.parametrize("eta", [1.0, 0.4])
    def test_asymptotic_step_probability(self, mu, eta):
        state = make_poisson(mu, trunc_tol=1e-14)
        trace = run_protocol(heralded_config(state, eta, 10))
        assert trace.records[-1].p_succ == pytest.approx(1.0 - eta * mu, rel=0.01)

    def test_ehd_factors(self):
        assert ehd_reduction_factor(0.4, 0.65, 1) == pytest.approx(0.385, abs=5e-4)
        assert ehd_reduction_factor(0.4, 0.65, 3) == pytest.approx(0.057, abs=5e-4)
        assert ehd_reduction_factor(0.0, 0.65, 5) == 1.0

    def test_ehd_validation(self):
        with pytest.raises(ValueError):
            ehd_reduction_factor(0.7, 0.65, 1)
        with pytest.raises(ValueError):
            ehd_reduction_factor(0.4, 0.65, 0)
