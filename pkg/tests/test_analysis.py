import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from remotebell.analysis import (
    TSIRELSON_BOUND,
    CorrelationEstimate,
    FitError,
    NoDataError,
    calibrate_dark_probability,
    chsh_from_values,
    chsh_S,
    chsh_settings,
    estimate_E,
    expected_S,
    find_optimal_angles,
    fit_correlation,
    fit_fringe,
    model_S,
)
from remotebell.detection import AnalyzerSetting, DetectorBank, analytic_correlation, pair_probabilities
from remotebell.model import EffectiveTwoPhotonState
from remotebell.montecarlo import CoincidenceCounts

from .conftest import REF_ETA_F, CHSH_ANGLES

SETTING = AnalyzerSetting(0.0, 0.0)
REFERENCE_E = (0.447, 0.640, 0.572, -0.504)
REFERENCE_SIGMA = (0.017, 0.014, 0.015, 0.016)


class TestEstimateE:
    def test_perfect_correlation(self):
        est = estimate_E(CoincidenceCounts(c13=500, c24=500), SETTING)
        assert (est.e_value, est.sigma, est.n_coincidences) == (1.0, 0.0, 1000)

    def test_worked_example(self):
        est = estimate_E(CoincidenceCounts(c13=100, c24=100, c14=50, c23=50), SETTING)
        assert est.e_value == pytest.approx(1 / 3)
        assert est.sigma == pytest.approx(math.sqrt((1 - 1 / 9) / 300))
        assert round(est.sigma, 4) == 0.0544

    def test_reference_row_implies_count(self):
        # inverting sigma = sqrt((1 - E^2)/N) for 0.447 +- 0.017
        n = (1 - 0.447**2) / 0.017**2
        assert n == pytest.approx(2.77e3, rel=0.01)

    def test_no_data(self):
        with pytest.raises(NoDataError):
            estimate_E(CoincidenceCounts(trials=100), SETTING)

    @given(*(st.integers(0, 10**6) for _ in range(4)), st.integers(1, 50))
    def test_rate_independent(self, a, b, c, d, k):
        if a + b + c + d == 0:
            return
        base = estimate_E(CoincidenceCounts(a, b, c, d), SETTING)
        scaled = estimate_E(CoincidenceCounts(k * a, k * b, k * c, k * d), SETTING)
        assert scaled.e_value == pytest.approx(base.e_value, abs=1e-12)
        assert abs(base.e_value) <= 1

    @given(*(st.integers(0, 10**5) for _ in range(4)))
    def test_poisson_alternative_agrees(self, a, b, c, d):
        counts = CoincidenceCounts(a, b, c, d)
        if counts.total <= 1000:
            return
        binomial = estimate_E(counts, SETTING).sigma
        poisson = estimate_E(counts, SETTING, error_model="poisson").sigma
        assert poisson == pytest.approx(binomial, rel=0.05, abs=1e-12)


class TestChsh:
    def test_reference(self):
        bell = chsh_from_values(REFERENCE_E, *CHSH_ANGLES, sigmas=REFERENCE_SIGMA)
        assert bell.s_value == pytest.approx(2.163, abs=1e-9)
        assert bell.sigma == pytest.approx(0.0311, abs=1e-4)
        assert bell.sigma**2 == pytest.approx(sum(s * s for s in REFERENCE_SIGMA), rel=1e-12)
        assert bell.violates

    def test_zero(self):
        assert chsh_from_values((0, 0, 0, 0), *CHSH_ANGLES).s_value == 0.0

    def test_ideal_values(self):
        bell = chsh_from_values((0.3840, 0.9047, 0.9205, -0.3907), *CHSH_ANGLES)
        assert bell.s_value == pytest.approx(2.600, abs=1e-3)

    def test_settings_must_line_up(self):
        ests = [CorrelationEstimate(0.1, 0.0, s, 1) for s in chsh_settings(*CHSH_ANGLES)]
        with pytest.raises(ValueError):
            chsh_S(ests[1], ests[0], ests[2], ests[3])
        dup = [CorrelationEstimate(0.1, 0.0, s, 1) for s in chsh_settings(10.0, 10.0, 0.0, 45.0)]
        with pytest.raises(ValueError):
            chsh_S(*dup)

    @given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
    def test_algebraic_bound(self, es):
        assert abs(chsh_from_values(es, *CHSH_ANGLES).s_value) <= 4


class TestFringeFit:
    def test_round_trip_on_pair_rates(self, reference_state):
        theta = np.arange(0, 180, 15.0)  # 12 points
        rates = [1e4 * pair_probabilities(reference_state, AnalyzerSetting(t, 135.0))[0, 0] for t in theta]
        fit = fit_fringe([(t, r, None) for t, r in zip(theta, rates)])
        # generating curve: the rate is a + b cos 2t + c sin 2t; recover it by exact interpolation
        X = np.column_stack([np.ones(3), np.cos(np.radians(2 * theta[:3])), np.sin(np.radians(2 * theta[:3]))])
        a, b, c = np.linalg.solve(X, rates[:3])
        assert fit.visibility == pytest.approx(math.hypot(b, c) / a, abs=1e-6)
        assert fit.phase == pytest.approx(0.5 * math.degrees(math.atan2(c, b)), abs=1e-6)
        assert math.sqrt(fit.chi2) <= 1e-9 * fit.offset

    def test_constant(self):
        fit = fit_fringe([(t, 50.0, 7.0) for t in range(0, 180, 30)])
        assert fit.visibility == pytest.approx(0.0, abs=1e-12)
        assert fit.offset == pytest.approx(50.0)

    def test_complementary_ports_are_90_degrees_apart(self, reference_state):
        theta = np.arange(0, 180, 15.0)
        fits = []
        for port in (0, 1):
            rates = [1e4 * pair_probabilities(reference_state, AnalyzerSetting(t, 135.0))[port, 0] for t in theta]
            fits.append(fit_fringe([(t, r, math.sqrt(r) + 1) for t, r in zip(theta, rates)]))
        gap = (fits[1].phase - fits[0].phase) % 180
        assert gap == pytest.approx(90.0, abs=1e-6)
        assert fits[0].visibility == pytest.approx(fits[1].visibility, abs=1e-6)

    def test_weighted_noisy_fit_within_errors(self):
        rng = np.random.default_rng(4)
        theta = np.arange(0, 180, 10.0)
        truth = 400 * (1 + 0.8 * np.cos(np.radians(2 * (theta - 20))))
        y = rng.poisson(truth)
        fit = fit_fringe([(t, c, math.sqrt(max(c, 1))) for t, c in zip(theta, y)])
        assert abs(fit.visibility - 0.8) < 4 * fit.visibility_err
        assert abs(fit.phase - 20) < 4 * fit.phase_err
        assert fit.dof == len(theta) - 3

    def test_degenerate(self):
        with pytest.raises(FitError):
            fit_fringe([(10.0, 1.0, 1.0)] * 6)
        with pytest.raises(FitError):
            fit_fringe([(0.0, 1.0, 1.0), (90.0, 2.0, 1.0)])


def e_samples(state, theta_b, theta_a, visibility=1.0, sigma=0.01):
    out = []
    for t in theta_a:
        s = AnalyzerSetting(float(t), float(theta_b))
        out.append((float(t), CorrelationEstimate(analytic_correlation(state, s, visibility), sigma, s, 1000)))
    return out


class TestCorrelationFit:
    def test_recovers_product(self, reference_state):
        fit = fit_correlation(e_samples(reference_state, 45.0, np.arange(0, 180, 22.5)), 45.0)
        assert fit.product == pytest.approx(math.sin(2 * REF_ETA_F), abs=1e-6)
        assert fit.product == pytest.approx(0.9823, abs=1e-4)
        assert fit.phase == pytest.approx(0.0, abs=1e-6)

    def test_maximal_entanglement_kills_difference_term(self):
        state = EffectiveTwoPhotonState(math.pi / 4)
        fit = fit_correlation(e_samples(state, 45.0, np.arange(0, 180, 22.5)), 45.0)
        assert fit.amplitude_difference == pytest.approx(0.0, abs=1e-9)

    def test_uniform_background_visibility(self, reference_state):
        samples = []
        for tb in (0.0, 45.0, 90.0, 135.0):
            samples += e_samples(reference_state, tb, np.arange(0, 180, 15.0), visibility=0.83, sigma=0.02)
        fit = fit_correlation(samples)
        assert not fit.visibility_fixed
        assert abs(fit.visibility - 0.83) <= max(fit.visibility_err, 1e-9)
        assert fit.product == pytest.approx(math.sin(2 * REF_ETA_F), abs=1e-6)

    def test_phase_offset(self, reference_state):
        shifted = [
            (t + 7.0, CorrelationEstimate(est.e_value, est.sigma, AnalyzerSetting(t + 7.0, 30.0), 1))
            for t, est in e_samples(reference_state, 30.0, np.arange(0, 180, 15.0))
        ]
        fit = fit_correlation(shifted, 30.0)
        assert fit.phase == pytest.approx(7.0, abs=1e-6)
        assert fit.product == pytest.approx(math.sin(2 * REF_ETA_F), abs=1e-6)

    def test_insufficient(self, reference_state):
        with pytest.raises(FitError):
            fit_correlation(e_samples(reference_state, 45.0, [0.0, 30.0, 60.0]))
        with pytest.raises(FitError):
            fit_correlation(e_samples(reference_state, 0.0, np.arange(0, 180, 15.0)))
        with pytest.raises(FitError):
            fit_correlation(e_samples(reference_state, 45.0, np.arange(0, 180, 15.0)), theta_b=0.0)


class TestOptimalAngles:
    def test_maximal_entanglement(self):
        best = find_optimal_angles(EffectiveTwoPhotonState(math.pi / 4))
        assert abs(best.s_value) == pytest.approx(TSIRELSON_BOUND, abs=1e-6)
        assert all(0 <= a < 180 for a in (best.theta_a, best.theta_a_prime, best.theta_b, best.theta_b_prime))
        assert model_S(EffectiveTwoPhotonState(math.pi / 4), (0.0, 135.0, 22.5, 157.5)) == pytest.approx(
            -TSIRELSON_BOUND, abs=1e-12
        )

    @pytest.mark.parametrize("eta_f", [0.0, 0.3, math.pi / 4, 1.2, math.pi / 2])
    def test_quarter_phase_limit(self, eta_f):
        assert abs(find_optimal_angles(EffectiveTwoPhotonState(eta_f, math.pi / 2)).s_value) == pytest.approx(2.0, abs=1e-6)

    def test_beats_reference_angles(self, reference_state):
        at_reference = model_S(reference_state, CHSH_ANGLES)
        assert at_reference == pytest.approx(2.600, abs=2e-3)
        best = find_optimal_angles(reference_state)
        assert abs(best.s_value) >= at_reference
        assert abs(best.s_value) <= TSIRELSON_BOUND + 1e-9

    def test_deterministic(self, reference_state):
        assert find_optimal_angles(reference_state) == find_optimal_angles(reference_state)

    def test_visibility_scales(self, reference_state):
        full = find_optimal_angles(reference_state)
        part = find_optimal_angles(reference_state, 0.5)
        assert abs(part.s_value) == pytest.approx(0.5 * abs(full.s_value), abs=1e-6)


def test_tsirelson_sweep():
    rng = np.random.default_rng(12)
    n = 10**6
    eta_f = rng.uniform(0, math.pi / 2, n)
    phi_f = rng.uniform(-math.pi, math.pi, n)
    v = rng.uniform(0, 1, n)
    a, a2, b, b2 = rng.uniform(0, 180, (4, n))
    from remotebell.detection import correlation_model as E

    s = E(eta_f, phi_f, a, b, v) + E(eta_f, phi_f, a2, b, v) + E(eta_f, phi_f, a, b2, v) - E(eta_f, phi_f, a2, b2, v)
    assert np.abs(s).max() <= TSIRELSON_BOUND + 1e-9


class TestBackgroundCalibration:
    def test_hits_target(self):
        state = EffectiveTwoPhotonState(REF_ETA_F, 0.0, p_pair=2.4e-4, p_single=5e-3, w_plus=0.659)
        bank = calibrate_dark_probability(state, DetectorBank((0.6,) * 4), 0.831)
        ratio = expected_S(state, bank, CHSH_ANGLES) / model_S(state, CHSH_ANGLES)
        assert ratio == pytest.approx(0.831, abs=1e-9)
        assert len(set(bank.p_dark)) == 1 and bank.p_dark[0] > 0

    def test_visibility_is_uniform_after_symmetrization(self):
        from remotebell.analysis import expected_correlation

        state = EffectiveTwoPhotonState(REF_ETA_F, 0.0, p_pair=2.4e-4, p_single=5e-3, w_plus=0.659)
        bank = calibrate_dark_probability(state, DetectorBank((0.9, 0.5, 0.7, 0.6)), 0.831)
        for setting in chsh_settings(*CHSH_ANGLES):
            ratio = expected_correlation(state, setting, bank) / analytic_correlation(state, setting)
            assert ratio == pytest.approx(0.831, abs=1e-6)
