"""
End-to-end recovery checks against analytic optima of synthetic processes.

Most of these train real models and are marked ``slow``; run them with
``pytest -m slow``.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from ctpp.core.enums import Mode, Sampler
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.params import ParamStore
from ctpp.core.nncore.tensor import Tensor
from ctpp.features.decoder.models.decoder_model import DistDecoder
from ctpp.features.decoder.services.decoder_service import lognormmix_logpdf, mark_log_probs, mixture_params
from ctpp.features.diagnostics.services.gradcheck_service import run_gradcheck
from ctpp.features.encoder.services.encoder_service import conv_channel
from ctpp.features.events.schemas.event_schemas import Dataset, EventSequence
from ctpp.features.events.services.batching import make_batch
from ctpp.features.kernel.models.siren_model import SirenKernel
from ctpp.features.kernel.services.kernel_service import kernel_eval
from ctpp.features.synth.schemas.synth_schemas import HawkesSpec, LocalMajoritySpec, PoissonSpec, RenewalSpec
from ctpp.features.synth.services.sampler_service import sample_dataset
from ctpp.features.train.models.ctpp_model import CtppModel
from ctpp.features.train.schemas.train_schemas import ModelConfig, TrainConfig
from ctpp.features.train.services.eval_service import evaluate
from ctpp.features.train.services.train_service import train_model
from ctpp.main import main

SMALL_MODEL = ModelConfig(embed_dim=8, hidden_dim=16, horizons=[3.0, 5.0], siren_hidden=[16, 16], num_components=4)


def _synthetic(sampler, spec, num_marks, sizes=(1000, 200, 200)):
    train, validation, test = (
        sample_dataset(sampler, spec, count, seed=seed) for seed, count in enumerate(sizes, start=1)
    )
    return Dataset(train=train, validation=validation, test=test, num_marks=num_marks)


def _fit(dataset, model_cfg=SMALL_MODEL, **train_options):
    options = {"max_epochs": 25, "batch_size": 32, "lr": 5e-3, "early_stop_patience": 4, "seed": 0}
    options.update(train_options)
    config = TrainConfig(**options)
    result = train_model(dataset, model_cfg, config)
    return evaluate(result.model, dataset.test, expected_mode=config.mode)


@pytest.mark.slow
def test_gradients_across_seeds():
    run_gradcheck().raise_for_failure()


@pytest.mark.slow
def test_convolution_matches_double_loop():
    gen = np.random.default_rng(2024)
    for instance in range(100):
        length, dim = int(gen.integers(1, 33)), int(gen.integers(1, 9))
        mode = "full" if instance % 2 else "depthwise"
        kernel = SirenKernel(ParamStore(), "k", dim, gen, (8, 8), 1.0, mode)
        times = np.cumsum(gen.exponential(1.0, size=length))
        # every fifth instance uses a horizon shorter than the typical gap
        horizon = 0.3 if instance % 5 == 0 else float(gen.choice([2.0, 6.0, math.inf]))
        embeddings = gen.normal(size=(length, dim))
        expected = np.zeros_like(embeddings)
        for i in range(length):
            for j in range(i):
                if times[i] - times[j] <= horizon:
                    psi = kernel_eval(kernel, times[i] - times[j])
                    expected[i] += embeddings[j] @ psi if mode == "full" else embeddings[j] * psi
        with T.no_grad():
            got = conv_channel(Tensor(embeddings), times, kernel, horizon).data
        np.testing.assert_allclose(got, expected, atol=1e-10, err_msg=f"instance {instance}")


@pytest.mark.slow
def test_densities_normalized():
    gen = np.random.default_rng(7)
    for draw in range(20):
        decoder = DistDecoder(ParamStore(), 6, 5, 4, gen)
        h = Tensor(gen.normal(size=6))
        params = mixture_params(h, decoder)

        def integrand(u):
            tau = math.exp(u)
            return math.exp(float(lognormmix_logpdf(np.array([tau]), params).data[0])) * tau

        total, _ = integrate.quad(integrand, -60.0, math.log(1e6), limit=400)
        assert total == pytest.approx(1.0, abs=1e-3), f"draw {draw}"
        assert abs(np.exp(mark_log_probs(h, decoder).data).sum() - 1.0) < 1e-12


@pytest.mark.slow
def test_renewal_recovery():
    dataset = _synthetic(Sampler.RENEWAL, RenewalSpec(log_mean=0.0, log_std=0.5, count=64), 1)
    metrics = _fit(dataset)
    # entropy of LogNormal(0, 0.5) is 0.5 + ln(0.5 sqrt(2 pi)) = 0.7258
    assert metrics.time_nll <= 0.746


@pytest.mark.slow
def test_mark_entropy_recovery():
    spec = PoissonSpec(rate=1.0, mark_probs=[0.7, 0.3], count=64)
    dataset = _synthetic(Sampler.POISSON, spec, 2)
    probabilistic = _fit(dataset)
    assert probabilistic.mark_nll == pytest.approx(-0.7 * math.log(0.7) - 0.3 * math.log(0.3), abs=0.02)
    prediction = _fit(dataset, mode=Mode.PREDICTION)
    assert prediction.accuracy == pytest.approx(70.0, abs=2.0)


@pytest.mark.slow
def test_poisson_recovery():
    dataset = _synthetic(Sampler.POISSON, PoissonSpec(rate=1.0, count=64), 1)
    assert _fit(dataset).time_nll == pytest.approx(1.0, abs=0.1)


@pytest.mark.slow
def test_history_beats_constant_state_on_hawkes():
    spec = HawkesSpec(mu=0.5, alpha=0.8, decay=1.0, horizon=60.0)
    dataset = _synthetic(Sampler.HAWKES, spec, 1, sizes=(600, 120, 120))
    with_history = _fit(dataset)
    constant = _fit(dataset, SMALL_MODEL.model_copy(update={"constant_history": True}))
    assert constant.time_nll - with_history.time_nll >= 0.05


@pytest.mark.slow
def test_local_context_beats_ablation():
    spec = LocalMajoritySpec(rate=1.0, num_marks=3, window=5.0, count=64, noise=0.1)
    dataset = _synthetic(Sampler.LOCAL, spec, 3)
    local = _fit(dataset, mode=Mode.PREDICTION)
    ablated = _fit(dataset, mode=Mode.PREDICTION, ablate_local=True)
    assert local.accuracy - ablated.accuracy >= 3.0


def test_hidden_states_ignore_future_events():
    config = ModelConfig(
        embed_dim=4, hidden_dim=6, num_layers=2, horizons=[1.0, math.inf],
        horizon_unit="absolute", siren_hidden=[6, 6], num_components=2,
    )
    model = CtppModel(config, 3, Mode.PROBABILISTIC, config.horizons, seed=5)
    gen = np.random.default_rng(99)
    for _ in range(50):
        length = int(gen.integers(2, 12))
        cut = int(gen.integers(1, length))
        times = np.cumsum(gen.exponential(1.0, size=length))
        marks = gen.integers(0, 3, size=length)
        future_times = times.copy()
        future_times[cut:] = times[cut - 1] + np.cumsum(gen.exponential(2.0, size=length - cut))
        future_marks = marks.copy()
        future_marks[cut:] = gen.integers(0, 3, size=length - cut)
        with T.no_grad():
            base = model.encode(make_batch([EventSequence(marks=marks.tolist(), times=times.tolist())])).data
            changed = model.encode(
                make_batch([EventSequence(marks=future_marks.tolist(), times=future_times.tolist())])
            ).data
        np.testing.assert_allclose(changed[0, :cut], base[0, :cut], rtol=0.0, atol=1e-12)


def test_identical_runs_are_bit_identical(tmp_path, run_config_file):
    reports = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["train", "--config", str(run_config_file), "--output-dir", str(out)]) == 0
        assert main(["eval", "--checkpoint", str(out / "checkpoint.npz")]) == 0
        reports.append(((out / "checkpoint.npz").read_bytes(), (out / "metrics_test.json").read_bytes()))
    assert reports[0] == reports[1]
