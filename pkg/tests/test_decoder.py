import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sps

from ctpp.core.exceptions import DomainError, SpecError
from ctpp.core.nncore.params import ParamStore
from ctpp.core.nncore.tensor import Tensor
from ctpp.features.decoder.models.decoder_model import DistDecoder, PredDecoder
from ctpp.features.decoder.services.decoder_service import (
    INTERVAL_FLOOR,
    LOG_SCALE_LIMIT,
    floor_intervals,
    lognormmix_logpdf,
    mark_log_probs,
    mixture_mean,
    mixture_params,
    predict_next,
    predicted_intervals,
    sample_next,
)

HIDDEN = 5


def _dist(seed=0, num_components=3, mark_bias=False):
    return DistDecoder(ParamStore(), HIDDEN, 4, num_components, np.random.default_rng(seed), mark_bias)


def _density(params, tau):
    return math.exp(lognormmix_logpdf(np.array([tau]), params).data[0])


class TestMixture:
    @pytest.mark.parametrize("seed", range(3))
    def test_density_integrates_to_one(self, seed):
        params = mixture_params(Tensor(np.random.default_rng(seed).normal(size=HIDDEN)), _dist(seed))
        # integrate over u = log(tau)
        total, _ = integrate.quad(lambda u: _density(params, math.exp(u)) * math.exp(u), -40.0, 40.0, limit=200)
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_matches_scipy_lognormal_mixture(self, rng):
        params = mixture_params(Tensor(rng.normal(size=HIDDEN)), _dist())
        taus = rng.lognormal(0.0, 1.0, size=20)
        expected = sum(
            w * sps.lognorm(s=sigma, scale=math.exp(mu)).pdf(taus)
            for w, sigma, mu in zip(params.weights, params.scales, params.means)
        )
        got = np.exp(lognormmix_logpdf(taus, params).data)
        np.testing.assert_allclose(got, expected, rtol=1e-10)

    def test_weights_normalized(self, rng):
        params = mixture_params(Tensor(rng.normal(size=(2, 3, HIDDEN))), _dist())
        np.testing.assert_allclose(params.weights.sum(axis=-1), 1.0, atol=1e-12)
        assert params.num_components == 3

    def test_log_scale_clamped(self):
        decoder = _dist()
        decoder.b_s.data = np.array([50.0, -50.0, 0.0])
        decoder.w_s.data = np.zeros_like(decoder.w_s.data)
        params = mixture_params(Tensor(np.zeros(HIDDEN)), decoder)
        np.testing.assert_array_equal(params.log_scales.data, [LOG_SCALE_LIMIT, -LOG_SCALE_LIMIT, 0.0])

    def test_single_component_is_lognormal(self):
        decoder = _dist(num_components=1)
        decoder.w_mu.data[:] = 0.0
        decoder.w_s.data[:] = 0.0
        decoder.b_mu.data = np.array([0.3])
        decoder.b_s.data = np.array([math.log(0.5)])
        params = mixture_params(Tensor(np.ones(HIDDEN)), decoder)
        taus = np.array([0.2, 1.0, 3.0])
        np.testing.assert_allclose(
            lognormmix_logpdf(taus, params).data,
            sps.lognorm(s=0.5, scale=math.exp(0.3)).logpdf(taus),
            rtol=1e-12,
        )
        assert mixture_mean(params) == pytest.approx(math.exp(0.3 + 0.125))

    def test_mean_matches_first_moment(self, rng):
        params = mixture_params(Tensor(rng.normal(size=HIDDEN)), _dist(1))
        moment, _ = integrate.quad(
            lambda u: _density(params, math.exp(u)) * math.exp(2.0 * u), -40.0, 40.0, limit=200
        )
        assert mixture_mean(params) == pytest.approx(moment, rel=1e-4)

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_non_positive_interval(self, rng, tau):
        params = mixture_params(Tensor(rng.normal(size=HIDDEN)), _dist())
        with pytest.raises(DomainError):
            lognormmix_logpdf(np.array([1.0, tau]), params)

    def test_floor(self):
        np.testing.assert_array_equal(floor_intervals(np.array([0.0, 2.0])), [INTERVAL_FLOOR, 2.0])

    def test_needs_components(self):
        with pytest.raises(SpecError):
            _dist(num_components=0)


class TestMarks:
    def test_probabilities_sum_to_one(self, rng):
        log_probs = mark_log_probs(Tensor(rng.normal(size=(3, HIDDEN))), _dist()).data
        np.testing.assert_allclose(np.exp(log_probs).sum(axis=-1), 1.0, atol=1e-12)

    def test_bias_is_optional(self):
        assert _dist().b_pi is None
        assert _dist(mark_bias=True).b_pi.shape == (4,)


class TestSampling:
    def test_future_time_and_valid_mark(self, rng):
        decoder = _dist()
        h = rng.normal(size=HIDDEN)
        for seed in range(20):
            mark, time = sample_next(h, 3.0, decoder, seed)
            assert 0 <= mark < 4
            assert time > 3.0

    def test_reproducible(self, rng):
        decoder = _dist()
        h = rng.normal(size=HIDDEN)
        assert sample_next(h, 0.0, decoder, 9) == sample_next(h, 0.0, decoder, 9)
        seq = np.random.SeedSequence(5)
        assert sample_next(h, 0.0, decoder, seq) == sample_next(h, 0.0, decoder, np.random.SeedSequence(5))

    def test_sample_mean(self):
        decoder = _dist(num_components=1)
        decoder.w_mu.data[:] = 0.0
        decoder.w_s.data[:] = 0.0
        decoder.b_s.data = np.array([math.log(0.25)])
        h = np.zeros(HIDDEN)
        draws = np.array([sample_next(h, 0.0, decoder, seed)[1] for seed in range(2000)])
        params = mixture_params(Tensor(h), decoder)
        se = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - mixture_mean(params)) < 4.0 * se

    def test_vanishing_scale_gives_unit_interval(self):
        decoder = _dist(num_components=1)
        decoder.b_mu.data = np.array([0.0])
        # log(1e-9) sits below the clamp, so sigma ends up at exp(-10)
        decoder.b_s.data = np.array([math.log(1e-9)])
        h = np.zeros(HIDDEN)
        for seed in range(50):
            _, time = sample_next(h, 2.0, decoder, seed)
            assert time - 2.0 == pytest.approx(1.0, abs=5e-4)

    def test_sample_log_likelihood_matches_negative_entropy(self):
        decoder = _dist(num_components=3)
        decoder.b_w.data = np.array([0.0, 1.0, -0.5])
        decoder.b_s.data = np.log([0.3, 0.8, 0.5])
        decoder.b_mu.data = np.array([-1.0, 0.5, 1.5])
        h = np.zeros(HIDDEN)
        params = mixture_params(Tensor(h), decoder)

        draws = np.array([sample_next(h, 0.0, decoder, seed)[1] for seed in range(4000)])
        log_likelihood = lognormmix_logpdf(draws, params).data
        se = log_likelihood.std() / math.sqrt(log_likelihood.size)

        def integrand(u):
            log_f = float(lognormmix_logpdf(np.array([math.exp(u)]), params).data[0])
            return math.exp(log_f + u) * log_f

        negative_entropy, _ = integrate.quad(integrand, -15.0, 15.0, limit=400)
        assert abs(log_likelihood.mean() - negative_entropy) < 3.0 * se


class TestPrediction:
    def _pred(self):
        decoder = PredDecoder(ParamStore(), HIDDEN, 3, np.random.default_rng(0), mark_bias=True)
        decoder.w_pi.data[:] = 0.0
        decoder.b_pi.data = np.array([0.0, 5.0, 0.0])
        decoder.w_t.data[:] = 0.0
        decoder.b_t.data = np.array([math.log(2.0)])
        return decoder

    def test_predict_next(self, rng):
        mark, time = predict_next(rng.normal(size=HIDDEN), 1.5, self._pred())
        assert mark == 1
        assert time == pytest.approx(3.5)

    def test_intervals_positive(self, rng):
        decoder = PredDecoder(ParamStore(), HIDDEN, 3, np.random.default_rng(0))
        out = predicted_intervals(Tensor(rng.normal(size=(2, 4, HIDDEN))), decoder).data
        assert out.shape == (2, 4)
        assert np.all(out > 0)
