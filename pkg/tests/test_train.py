import csv
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import yaml
from scipy import stats as sps

from conftest import random_sequences
from ctpp.core.enums import Mode
from ctpp.core.exceptions import ConfigError, TrainingDiverged, UsageError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.params import load_checkpoint, save_checkpoint
from ctpp.features.events.schemas.event_schemas import Dataset, EventSequence
from ctpp.features.events.services.batching import make_batch
from ctpp.features.events.services.event_stats import compute_stats
from ctpp.features.train.models.ctpp_model import CtppModel, resolve_horizons
from ctpp.features.train.schemas.train_schemas import ModelConfig, RunConfig, TrainConfig
from ctpp.features.train.services import train_service
from ctpp.features.train.services.config_service import (
    default_config_text,
    dump_run_config,
    load_config_dataset,
    load_run_config,
    parse_run_config,
)
from ctpp.features.train.services.eval_service import evaluate, evaluate_checkpoint
from ctpp.features.train.services.inference_service import predict_sequences, sample_sequence
from ctpp.features.train.services.loss_service import nll_loss, nll_terms, pred_loss, target_mask
from ctpp.features.train.services.sweep_service import GRID_COLUMNS, run_sweep
from ctpp.features.train.services.train_service import (
    CHECKPOINT_NAME,
    HISTORY_NAME,
    batch_gradients,
    build_model,
    evaluate_loss,
    train_model,
)


def _scored_intervals(sequences):
    """Intervals of every event but the first of each sequence."""
    return np.concatenate([np.diff(seq.times) for seq in sequences if len(seq) > 1])


def _loss_and_grads(model, batch):
    if model.mode == Mode.PROBABILISTIC:
        loss = nll_loss(model, batch)
    else:
        loss = pred_loss(model, batch, beta=0.3)
    return float(loss.data), T.grad(loss, list(model.store))


def _constant(tiny_config, mode, time_scale=1.0):
    config = tiny_config.model_copy(update={"constant_history": True})
    return CtppModel(config, 3, mode, config.horizons, seed=0, time_scale=time_scale)


class TestModel:
    def test_resolve_horizons(self):
        assert resolve_horizons(ModelConfig(horizons=[3.0, math.inf]), 2.0) == [6.0, math.inf]
        assert resolve_horizons(ModelConfig(horizons=[3.0], horizon_unit="absolute"), 2.0) == [3.0]
        with pytest.raises(UsageError):
            resolve_horizons(ModelConfig(), 0.0)

    def test_first_history_state_is_zero(self, prob_model, toy_sequences):
        history = prob_model.history_states(make_batch(toy_sequences)).data
        np.testing.assert_array_equal(history[:, 0], 0.0)
        assert np.any(history[:, 1] != 0.0)

    def test_constant_history(self, tiny_config, toy_sequences):
        model = _constant(tiny_config, Mode.PROBABILISTIC)
        np.testing.assert_array_equal(model.history_states(make_batch(toy_sequences)).data, 0.0)

    def test_ablate_local(self, tiny_config):
        model = CtppModel(tiny_config, 3, Mode.PROBABILISTIC, tiny_config.horizons, ablate_local=True)
        assert len(model.local) == 0
        assert "kernel" not in model.store.groups()

    def test_seeded_initialization(self, tiny_config):
        first = CtppModel(tiny_config, 3, Mode.PREDICTION, tiny_config.horizons, seed=4).store.state_dict()
        second = CtppModel(tiny_config, 3, Mode.PREDICTION, tiny_config.horizons, seed=4).store.state_dict()
        assert all(np.array_equal(first[name], second[name]) for name in first)

    def test_checkpoint_round_trip(self, tmp_path, tiny_config, toy_sequences):
        config = tiny_config.model_copy(update={"horizons": [1.0, math.inf]})
        model = CtppModel(config, 3, Mode.PROBABILISTIC, config.horizons, seed=2, time_scale=0.5)
        path = model.save(tmp_path / "model.npz", {"best_epoch": 4})
        loaded = CtppModel.from_checkpoint(path)
        assert loaded.horizons == [1.0, math.inf]
        assert loaded.time_scale == 0.5
        assert loaded.config.model_dump() == config.model_dump()
        batch = make_batch(toy_sequences)
        np.testing.assert_array_equal(
            nll_loss(loaded, batch).data, nll_loss(model, batch).data
        )
        _, meta = load_checkpoint(path)
        assert meta["best_epoch"] == 4

    def test_incomplete_metadata(self, tmp_path, prob_model):
        path = save_checkpoint(tmp_path / "bare.npz", prob_model.store, {"mode": "probabilistic"})
        with pytest.raises(UsageError):
            CtppModel.from_checkpoint(path)


class TestLoss:
    def test_first_event_not_scored(self, toy_sequences):
        batch = make_batch(toy_sequences)
        total = sum(len(seq) for seq in toy_sequences)
        assert target_mask(batch).sum() == total - len(toy_sequences)
        assert target_mask(batch, score_first_event=True).sum() == total

    def test_constant_history_nll(self, tiny_config, toy_sequences):
        # at h = 0 marks are uniform and every mixture component is LogNormal(0, 1)
        model = _constant(tiny_config, Mode.PROBABILISTIC)
        intervals = _scored_intervals(toy_sequences)
        expected = math.log(3.0) - sps.lognorm(s=1.0).logpdf(intervals).mean()
        assert float(nll_loss(model, make_batch(toy_sequences)).data) == pytest.approx(expected, rel=1e-12)

    def test_constant_history_prediction_loss(self, tiny_config, toy_sequences):
        model = _constant(tiny_config, Mode.PREDICTION)
        intervals = _scored_intervals(toy_sequences)
        expected = math.log(3.0) + 0.3 * np.mean((1.0 - intervals) ** 2)
        got = float(pred_loss(model, make_batch(toy_sequences), beta=0.3).data)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_simultaneous_events_finite(self, prob_model):
        batch = make_batch([EventSequence(marks=[0, 1, 2], times=[1.0, 1.0, 1.0])])
        terms = nll_terms(prob_model, batch)
        assert terms.count == 2
        assert math.isfinite(float(terms.time_nll.data))

    @pytest.mark.parametrize("fixture", ["prob_model", "pred_model"])
    def test_padding_contributes_nothing(self, request, fixture, toy_sequences):
        model = request.getfixturevalue(fixture)
        loss, grads = _loss_and_grads(model, make_batch(toy_sequences))
        padded = make_batch(toy_sequences, pad_to=12)
        padding = ~padded.mask
        padded.marks[padding] = 2
        padded.times[padding] = 50.0
        padded.intervals[padding] = 5.0
        padded_loss, padded_grads = _loss_and_grads(model, padded)
        assert padded_loss == pytest.approx(loss, rel=1e-12)
        for a, b in zip(grads, padded_grads):
            np.testing.assert_allclose(b, a, rtol=0.0, atol=1e-12)

    @pytest.mark.parametrize("fixture", ["prob_model", "pred_model"])
    def test_invariant_to_batch_order(self, request, fixture, toy_sequences):
        model = request.getfixturevalue(fixture)
        loss, grads = _loss_and_grads(model, make_batch(toy_sequences))
        reversed_loss, reversed_grads = _loss_and_grads(model, make_batch(toy_sequences[::-1]))
        assert reversed_loss == pytest.approx(loss, rel=1e-12)
        for a, b in zip(grads, reversed_grads):
            np.testing.assert_allclose(b, a, rtol=0.0, atol=1e-12)

    def test_single_event_sequences_score_nothing(self, prob_model):
        batch = make_batch([EventSequence(marks=[0], times=[1.0])])
        assert nll_terms(prob_model, batch).count == 0
        assert float(nll_loss(prob_model, batch).data) == 0.0


class TestTraining:
    def test_writes_checkpoint_and_history(self, tmp_path, toy_dataset, tiny_config, tiny_train_config):
        result = train_model(toy_dataset, tiny_config, tiny_train_config, output_dir=tmp_path)
        assert result.checkpoint == tmp_path / CHECKPOINT_NAME
        assert result.checkpoint.is_file()
        with (tmp_path / HISTORY_NAME).open() as handle:
            rows = list(csv.DictReader(handle))
        assert [int(row["epoch"]) for row in rows] == list(range(1, len(rows) + 1))
        assert len(rows) == len(result.history) <= tiny_train_config.max_epochs
        assert result.best_val_loss == min(row.val_loss for row in result.history)
        _, meta = load_checkpoint(result.checkpoint)
        assert meta["best_epoch"] == result.best_epoch

    def test_restores_best_weights(self, toy_dataset, tiny_config, tiny_train_config):
        result = train_model(toy_dataset, tiny_config, tiny_train_config)
        assert evaluate_loss(result.model, toy_dataset.validation, tiny_train_config) == pytest.approx(
            result.best_val_loss, rel=1e-12
        )

    def test_improves_on_initial_loss(self, toy_dataset, tiny_config):
        config = TrainConfig(max_epochs=5, batch_size=4, lr=1e-2, seed=1)
        model = build_model(toy_dataset, tiny_config, config)
        initial = evaluate_loss(model, toy_dataset.validation, config)
        result = train_model(toy_dataset, tiny_config, config, model=model)
        assert result.best_val_loss < initial

    def test_deterministic(self, toy_dataset, tiny_config, tiny_train_config):
        first = train_model(toy_dataset, tiny_config, tiny_train_config).model.store.state_dict()
        second = train_model(toy_dataset, tiny_config, tiny_train_config).model.store.state_dict()
        assert all(np.array_equal(first[name], second[name]) for name in first)

    def test_sharded_gradients_match(self, toy_dataset, tiny_config):
        single = TrainConfig(threads=1)
        sharded = TrainConfig(threads=3)
        model = build_model(toy_dataset, tiny_config, single)
        loss_a, count_a, grads_a = batch_gradients(model, toy_dataset.train, single)
        with ThreadPoolExecutor(max_workers=3) as executor:
            loss_b, count_b, grads_b = batch_gradients(model, toy_dataset.train, sharded, executor)
        assert count_a == count_b
        assert loss_a == pytest.approx(loss_b, rel=1e-12)
        for a, b in zip(grads_a, grads_b):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_prediction_mode(self, toy_dataset, tiny_config):
        config = TrainConfig(mode=Mode.PREDICTION, max_epochs=2, batch_size=4)
        result = train_model(toy_dataset, tiny_config, config)
        assert result.model.mode == Mode.PREDICTION
        assert math.isfinite(result.best_val_loss)

    def test_early_stop_and_plateau_decay(self, monkeypatch, toy_dataset, tiny_config):
        monkeypatch.setattr(train_service, "evaluate_loss", lambda model, sequences, config: 1.0)
        config = TrainConfig(max_epochs=10, batch_size=4, lr=1e-3, plateau_patience=1, early_stop_patience=2)
        result = train_model(toy_dataset, tiny_config, config)
        assert result.stopped_early
        assert result.best_epoch == 1
        assert [row.lr for row in result.history] == pytest.approx([1e-3, 1e-3, 5e-4])

    def test_divergence_saves_last_good_weights(self, monkeypatch, tmp_path, toy_dataset, tiny_config):
        original = train_service.objective_sum

        def poisoned(model, batch, config):
            total, count = original(model, batch, config)
            return total * math.nan, count

        monkeypatch.setattr(train_service, "objective_sum", poisoned)
        with pytest.raises(TrainingDiverged) as info:
            train_model(toy_dataset, tiny_config, TrainConfig(batch_size=4), output_dir=tmp_path)
        assert info.value.exit_code == 3
        _, meta = load_checkpoint(info.value.checkpoint)
        assert meta["diverged"] is True

    def test_needs_validation_split(self, toy_dataset, tiny_config, tiny_train_config):
        dataset = Dataset(train=toy_dataset.train, num_marks=3)
        with pytest.raises(UsageError):
            train_model(dataset, tiny_config, tiny_train_config)


class TestEvaluate:
    def test_probabilistic_metrics(self, tiny_config, toy_sequences):
        model = _constant(tiny_config, Mode.PROBABILISTIC, time_scale=0.5)
        metrics = evaluate(model, toy_sequences)
        intervals = _scored_intervals(toy_sequences)
        assert metrics.num_events == intervals.size
        assert metrics.mark_nll == pytest.approx(math.log(3.0), rel=1e-12)
        assert metrics.time_nll == pytest.approx(-sps.lognorm(s=1.0).logpdf(intervals).mean(), rel=1e-12)
        assert metrics.nll == pytest.approx(metrics.mark_nll + metrics.time_nll)
        assert metrics.nll_correction == pytest.approx(math.log(2.0))
        assert metrics.time_nll_original_units == pytest.approx(metrics.time_nll + math.log(2.0))
        rmse = math.sqrt(np.mean((math.exp(0.5) - intervals) ** 2))
        assert metrics.rmse_mixture_mean == pytest.approx(rmse, rel=1e-12)
        assert metrics.accuracy is None

    def test_prediction_metrics(self, tiny_config, toy_sequences):
        model = _constant(tiny_config, Mode.PREDICTION, time_scale=0.5)
        metrics = evaluate(model, toy_sequences)
        intervals = _scored_intervals(toy_sequences)
        rmse = math.sqrt(np.mean((1.0 - intervals) ** 2))
        assert metrics.rmse == pytest.approx(rmse, rel=1e-12)
        assert metrics.rmse_original_units == pytest.approx(2.0 * rmse, rel=1e-12)
        assert 0.0 <= metrics.accuracy <= 100.0
        assert metrics.loss == pytest.approx(math.log(3.0) + 0.3 * rmse ** 2, rel=1e-12)
        assert metrics.nll is None

    def test_matches_training_objective(self, prob_model, toy_sequences):
        metrics = evaluate(prob_model, toy_sequences, batch_size=2)
        assert metrics.nll == pytest.approx(
            evaluate_loss(prob_model, toy_sequences, TrainConfig(batch_size=5)), rel=1e-10
        )

    def test_mode_mismatch(self, pred_model, toy_sequences):
        with pytest.raises(UsageError):
            evaluate(pred_model, toy_sequences, expected_mode=Mode.PROBABILISTIC)

    def test_nothing_to_score(self, prob_model):
        with pytest.raises(UsageError):
            evaluate(prob_model, [EventSequence(marks=[0], times=[0.5])])

    def test_report_lists_mode_fields(self, prob_model, toy_sequences):
        report = evaluate(prob_model, toy_sequences).to_report()
        assert "nll = " in report
        assert "accuracy" not in report

    def test_from_checkpoint(self, tmp_path, prob_model, toy_sequences):
        path = prob_model.save(tmp_path / "model.npz")
        assert evaluate_checkpoint(path, toy_sequences).nll == pytest.approx(evaluate(prob_model, toy_sequences).nll)


class TestInference:
    def test_predictions_follow_history(self, prob_model, pred_model, toy_sequences):
        for model in (prob_model, pred_model):
            predictions = predict_sequences(model, toy_sequences)
            assert len(predictions) == len(toy_sequences)
            for (mark, time), seq in zip(predictions, toy_sequences):
                assert 0 <= mark < 3
                assert time > seq.times[-1]

    def test_sample_continues_history(self, prob_model, toy_sequences):
        history = toy_sequences[0]
        sampled = sample_sequence(prob_model, history, 5, seed=3)
        assert len(sampled) == 5
        assert sampled.times[0] > history.times[-1]
        assert all(b > a for a, b in zip(sampled.times, sampled.times[1:]))
        assert sampled == sample_sequence(prob_model, history, 5, seed=3)

    def test_sample_without_history(self, prob_model):
        sampled = sample_sequence(prob_model, None, 4, seed=0)
        assert len(sampled) == 4
        assert sampled.times[0] > 0.0

    def test_sample_prefix_stable(self, prob_model, toy_sequences):
        short = sample_sequence(prob_model, toy_sequences[1], 2, seed=8)
        long = sample_sequence(prob_model, toy_sequences[1], 4, seed=8)
        assert short.marks == long.marks[:2]
        assert short.times == long.times[:2]

    def test_sample_needs_probabilistic_model(self, pred_model):
        with pytest.raises(UsageError):
            sample_sequence(pred_model, None, 3, seed=0)

    def test_sample_count_positive(self, prob_model):
        with pytest.raises(UsageError):
            sample_sequence(prob_model, None, 0, seed=0)


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="model.depth"):
            parse_run_config({"model": {"depth": 3}})

    def test_invalid_value(self):
        with pytest.raises(ConfigError):
            parse_run_config({"train": {"lr": -1.0}})

    def test_relative_paths_resolved(self, run_config_file, dataset_files):
        config = load_run_config(run_config_file)
        assert config.data.train == dataset_files["train"].resolve()
        assert config.model.num_components == 2
        assert config.train.max_epochs == 2

    def test_dump_round_trip(self, run_config_file, tmp_path):
        config = load_run_config(run_config_file)
        config = config.model_copy(update={"model": config.model.model_copy(update={"horizons": [2.0, math.inf]})})
        path = tmp_path / "again.yaml"
        path.write_text(dump_run_config(config), encoding="utf-8")
        assert load_run_config(path).model_dump() == config.model_dump()

    def test_default_text_parses(self):
        assert parse_run_config(yaml.safe_load(default_config_text())).model_dump() == RunConfig().model_dump()

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "missing.yaml")
        bad = tmp_path / "bad.yaml"
        bad.write_text("model: [unclosed\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(bad)
        listed = tmp_path / "list.yaml"
        listed.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(listed)

    def test_dataset_needs_data_section(self):
        with pytest.raises(ConfigError):
            load_config_dataset(None)

    def test_auto_time_scale(self, run_config_file):
        config = load_run_config(run_config_file)
        raw = load_config_dataset(config.data)
        data = config.data.model_copy(update={"auto_time_scale": True})
        scaled = load_config_dataset(data)
        assert compute_stats(scaled).delta == pytest.approx(1.0, rel=1e-12)
        assert scaled.time_scale == pytest.approx(1.0 / compute_stats(raw).delta)


class TestSweep:
    def test_grid_rows_and_csv(self, tmp_path, toy_dataset, tiny_config):
        out = tmp_path / "sweep.csv"
        rows = run_sweep(
            toy_dataset, tiny_config, TrainConfig(max_epochs=1, batch_size=4),
            horizon_multiples=[1.0, 2.0], channel_counts=[1], omegas=[1.0], output_csv=out,
        )
        assert [(row["channels"], row["horizon"]) for row in rows] == [(1, 1.0), (1, 2.0)]
        assert all(row["mode"] == "probabilistic" for row in rows)
        with out.open() as handle:
            reader = csv.DictReader(handle)
            assert reader.fieldnames[: len(GRID_COLUMNS)] == GRID_COLUMNS
            assert len(list(reader)) == 2

    def test_empty_axis(self, toy_dataset, tiny_config):
        with pytest.raises(UsageError):
            run_sweep(toy_dataset, tiny_config, TrainConfig(), [], [1], [1.0])

    def test_empty_split(self, tiny_config):
        dataset = Dataset(train=random_sequences(0, 4), validation=random_sequences(1, 2), num_marks=3)
        with pytest.raises(UsageError):
            run_sweep(dataset, tiny_config, TrainConfig(max_epochs=1), [1.0], [1], [1.0])


def test_split_files_feed_training(tmp_path, run_config_file):
    config = load_run_config(run_config_file)
    dataset = load_config_dataset(config.data)
    result = train_model(dataset, config.model, config.train, output_dir=tmp_path / "run")
    assert (tmp_path / "run" / CHECKPOINT_NAME).is_file()
    assert len(predict_sequences(result.model, dataset.test)) == len(dataset.test)
