"""
Command-line front end for the CTPP toolkit.
This file wires every command (synthesis, training, evaluation, prediction
and diagnostics) to the feature services.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from ctpp.core.config import Settings, get_settings
from ctpp.core.enums import Mode, Sampler
from ctpp.core.exceptions import CtppError, UsageError
from ctpp.core.log import configure_logging
from ctpp.core.nncore.gradcheck import DENOMINATOR_FLOOR
from ctpp.features.diagnostics.services.gradcheck_service import DEFAULT_SEEDS, ERROR_FLOOR, run_gradcheck
from ctpp.features.diagnostics.services.kernel_dump_service import dump_kernels
from ctpp.features.events.schemas.event_schemas import Dataset, EventSequence
from ctpp.features.events.services.event_io import DEFAULT_MAX_LENGTH, dump_jsonl, load_jsonl
from ctpp.features.events.services.event_stats import compute_stats, rescale_times, sequence_stats
from ctpp.features.synth.schemas.synth_schemas import (
    HawkesSpec,
    LocalMajoritySpec,
    PoissonSpec,
    RenewalSpec,
)
from ctpp.features.synth.services.sampler_service import sample_dataset
from ctpp.features.train.models.ctpp_model import CtppModel
from ctpp.features.train.schemas.train_schemas import RunConfig
from ctpp.features.train.services.config_service import (
    default_config_text,
    dump_run_config,
    load_config_dataset,
    load_run_config,
)
from ctpp.features.train.services.eval_service import evaluate
from ctpp.features.train.services.inference_service import predict_sequences, sample_sequence
from ctpp.features.train.services.sweep_service import run_sweep
from ctpp.features.train.services.train_service import CHECKPOINT_NAME, train_model

logger = logging.getLogger(__name__)

CONFIG_SNAPSHOT = "config.yaml"


def _floats(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _output_dir(args: argparse.Namespace, settings: Settings, config: Optional[RunConfig] = None) -> Path:
    """--output-dir, then the config's output_dir, then CTPP_OUTPUT_DIR."""
    if getattr(args, "output_dir", None) is not None:
        return Path(args.output_dir)
    if config is not None and config.output_dir is not None:
        return config.output_dir
    return settings.output_dir


def _apply_overrides(config: RunConfig, args: argparse.Namespace, settings: Settings) -> RunConfig:
    updates = {}
    if getattr(args, "mode", None) is not None:
        updates["mode"] = Mode(args.mode)
    if getattr(args, "ablate_local", False):
        updates["ablate_local"] = True
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        updates["threads"] = args.threads
    elif "threads" not in config.train.model_fields_set:
        updates["threads"] = settings.threads
    train = config.train.model_validate({**config.train.model_dump(), **updates})
    return config.model_copy(update={"train": train})


def _scaled(sequences: List[EventSequence], num_marks: int, factor: float) -> List[EventSequence]:
    if factor == 1.0:
        return sequences
    return rescale_times(Dataset.model_construct(
        train=sequences, validation=[], test=[], num_marks=num_marks, time_scale=1.0
    ), factor).train


# synth

def _synth_spec(args: argparse.Namespace):
    probs = args.mark_probs or [1.0]
    if args.sampler == Sampler.POISSON.value:
        return PoissonSpec(rate=args.rate, mark_probs=probs, horizon=args.horizon, count=args.len)
    if args.sampler == Sampler.HAWKES.value:
        spec = HawkesSpec(mu=args.mu, alpha=args.alpha, decay=args.decay, horizon=args.horizon, mark_probs=probs)
        spec.check_stationary()
        return spec
    if args.sampler == Sampler.RENEWAL.value:
        return RenewalSpec(log_mean=args.log_mean, log_std=args.log_std, count=args.len, mark_probs=probs)
    return LocalMajoritySpec(
        rate=args.rate, num_marks=args.num_marks, window=args.window, count=args.len, noise=args.noise
    )


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    spec = _synth_spec(args)
    sequences = sample_dataset(Sampler(args.sampler), spec, args.n_seqs, args.seed)
    out = Path(args.out) if args.out else _output_dir(args, settings) / f"{args.sampler}.jsonl"
    dump_jsonl(sequences, out)
    num_marks = getattr(spec, "num_marks", None) or len(spec.mark_probs)
    stats = sequence_stats(sequences, num_marks)
    print(f"🎲 {args.sampler}: {stats.num_sequences} sequences, {stats.num_events} events")
    print(f"   delta = {stats.delta:.6g}")
    print(f"💾 written to {out}")
    return 0


def cmd_stats(args: argparse.Namespace, settings: Settings) -> int:
    stats = compute_stats(load_jsonl(args.data, args.num_marks, args.max_length))
    for key, value in stats.model_dump().items():
        print(f"{key} = {value}")
    return 0


# training and evaluation

def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    config = _apply_overrides(load_run_config(args.config), args, settings)
    dataset = load_config_dataset(config.data)
    output_dir = _output_dir(args, settings, config)
    snapshot = config.model_copy(update={"output_dir": output_dir.resolve()})
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / CONFIG_SNAPSHOT).write_text(dump_run_config(snapshot), encoding="utf-8")
    print(f"🚀 training {config.train.mode.value} model")
    result = train_model(dataset, config.model, config.train, output_dir=output_dir)
    print(f"✅ best validation loss {result.best_val_loss:.5f} at epoch {result.best_epoch}")
    print(f"💾 checkpoint: {result.checkpoint}")
    return 0


def _checkpoint_config(args: argparse.Namespace) -> RunConfig:
    path = Path(args.config) if args.config else Path(args.checkpoint).parent / CONFIG_SNAPSHOT
    return load_run_config(path)


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    model = CtppModel.from_checkpoint(args.checkpoint)
    config = _checkpoint_config(args)
    dataset = load_config_dataset(config.data)
    try:
        sequences = dataset.split(args.split)
    except KeyError:
        raise UsageError(f"unknown split {args.split!r}")
    expected = Mode(args.mode) if args.mode else None
    metrics = evaluate(model, sequences, expected, score_first_event=config.train.score_first_event)
    out = Path(args.out) if args.out else Path(args.checkpoint).parent / f"metrics_{args.split}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    print(f"📊 {args.split} metrics")
    print(metrics.to_report())
    return 0


def cmd_predict(args: argparse.Namespace, settings: Settings) -> int:
    model = CtppModel.from_checkpoint(args.checkpoint)
    sequences = load_jsonl(args.data, model.num_marks, args.max_length).train
    predictions = predict_sequences(model, _scaled(sequences, model.num_marks, model.time_scale))
    out = Path(args.out) if args.out else _output_dir(args, settings) / "predictions.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for mark, time in predictions:
            handle.write(json.dumps({"mark": mark, "time": time / model.time_scale}) + "\n")
    print(f"🔮 {len(predictions)} next-event predictions written to {out}")
    return 0


def cmd_sample(args: argparse.Namespace, settings: Settings) -> int:
    model = CtppModel.from_checkpoint(args.checkpoint)
    histories: List[Optional[EventSequence]] = [None]
    if args.history:
        histories = _scaled(
            load_jsonl(args.history, model.num_marks, DEFAULT_MAX_LENGTH).train, model.num_marks, model.time_scale
        )
    samples = [sample_sequence(model, history, args.n, args.seed + i) for i, history in enumerate(histories)]
    samples = _scaled(samples, model.num_marks, 1.0 / model.time_scale)
    out = Path(args.out) if args.out else _output_dir(args, settings) / "samples.jsonl"
    dump_jsonl(samples, out)
    print(f"🎲 sampled {args.n} events for {len(samples)} histories, written to {out}")
    return 0


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    config = _apply_overrides(load_run_config(args.config), args, settings)
    dataset = load_config_dataset(config.data)
    out = Path(args.out) if args.out else _output_dir(args, settings, config) / "sweep.csv"
    rows = run_sweep(
        dataset, config.model, config.train,
        horizon_multiples=args.horizons, channel_counts=args.channels, omegas=args.omegas,
        output_csv=out, split=args.split,
    )
    print(f"📈 {len(rows)} sweep points written to {out}")
    return 0


def cmd_print_config(args: argparse.Namespace, settings: Settings) -> int:
    print(default_config_text(), end="")
    return 0


# diagnostics

def cmd_gradcheck(args: argparse.Namespace, settings: Settings) -> int:
    model_cfg = load_run_config(args.config).model if args.config else None
    report = run_gradcheck(
        model_cfg, seeds=list(range(args.seeds)), max_entries=args.max_entries, floor=args.floor
    )
    for mode, groups in report.errors.items():
        print(f"🔍 {mode}")
        for group, error in groups.items():
            mark = "✅" if error < report.tolerance else "❌"
            print(f"   {mark} {group}: {error:.3e}")
    report.raise_for_failure()
    print(f"✅ all gradients within {report.tolerance:g} (denominator floor {report.floor:g})")
    return 0


def cmd_dump_kernel(args: argparse.Namespace, settings: Settings) -> int:
    model = CtppModel.from_checkpoint(args.checkpoint)
    out = Path(args.out) if args.out else Path(args.checkpoint).parent / "kernels.csv"
    count = dump_kernels(model, out, args.grid_size, args.tau_max)
    print(f"💾 {count} kernel values written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="ctpp", description=f"{settings.app_name} v{settings.app_version}")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="sample a synthetic dataset")
    samplers = synth.add_subparsers(dest="sampler", required=True)
    for name in Sampler:
        sub = samplers.add_parser(name.value)
        sub.add_argument("--n-seqs", type=int, default=100)
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--out", default=None)
        sub.add_argument("--output-dir", default=None)
        sub.set_defaults(handler=cmd_synth)
        if name != Sampler.LOCAL:
            sub.add_argument("--mark-probs", type=_floats, default=None)
    poisson = samplers.choices[Sampler.POISSON.value]
    poisson.add_argument("--rate", type=float, required=True)
    poisson.add_argument("--len", type=int, default=None)
    poisson.add_argument("--horizon", type=float, default=None)
    hawkes = samplers.choices[Sampler.HAWKES.value]
    hawkes.add_argument("--mu", type=float, required=True)
    hawkes.add_argument("--alpha", type=float, required=True)
    hawkes.add_argument("--decay", type=float, required=True)
    hawkes.add_argument("--horizon", type=float, required=True)
    renewal = samplers.choices[Sampler.RENEWAL.value]
    renewal.add_argument("--log-mean", type=float, default=0.0)
    renewal.add_argument("--log-std", type=float, required=True)
    renewal.add_argument("--len", type=int, required=True)
    local = samplers.choices[Sampler.LOCAL.value]
    local.add_argument("--rate", type=float, default=1.0)
    local.add_argument("--num-marks", type=int, default=3)
    local.add_argument("--window", type=float, default=5.0)
    local.add_argument("--len", type=int, default=64)
    local.add_argument("--noise", type=float, default=0.1)

    stats = commands.add_parser("stats", help="dataset statistics")
    stats.add_argument("data")
    stats.add_argument("--num-marks", type=int, required=True)
    stats.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH)
    stats.set_defaults(handler=cmd_stats)

    for name, handler, help_text in (
        ("train", cmd_train, "train a model from a config file"),
        ("sweep", cmd_sweep, "train over a horizon x channels x omega_0 grid"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True)
        sub.add_argument("--mode", choices=[m.value for m in Mode], default=None)
        sub.add_argument("--ablate-local", action="store_true")
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--threads", type=int, default=None)
        sub.add_argument("--output-dir", default=None)
        sub.set_defaults(handler=handler)
    sweep = commands.choices["sweep"]
    sweep.add_argument("--horizons", type=_floats, default=[1.0, 3.0, 5.0, 10.0])
    sweep.add_argument("--channels", type=_ints, default=[1, 2, 3])
    sweep.add_argument("--omegas", type=_floats, default=[1.0])
    sweep.add_argument("--split", default="test")
    sweep.add_argument("--out", default=None)

    evaluate_cmd = commands.add_parser("eval", help="evaluate a checkpoint on a split")
    evaluate_cmd.add_argument("--checkpoint", required=True)
    evaluate_cmd.add_argument("--split", default="test")
    evaluate_cmd.add_argument("--config", default=None)
    evaluate_cmd.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    evaluate_cmd.add_argument("--out", default=None)
    evaluate_cmd.set_defaults(handler=cmd_eval)

    predict = commands.add_parser("predict", help="predict the event after each sequence")
    predict.add_argument("--checkpoint", required=True)
    predict.add_argument("--data", required=True)
    predict.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH)
    predict.add_argument("--out", default=None)
    predict.add_argument("--output-dir", default=None)
    predict.set_defaults(handler=cmd_predict)

    sample = commands.add_parser("sample", help="sample continuations from a probabilistic checkpoint")
    sample.add_argument("--checkpoint", required=True)
    sample.add_argument("--history", default=None)
    sample.add_argument("--n", type=int, default=10)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", default=None)
    sample.add_argument("--output-dir", default=None)
    sample.set_defaults(handler=cmd_sample)

    gradcheck = commands.add_parser("gradcheck", help="compare gradients with finite differences")
    gradcheck.add_argument("--config", default=None)
    gradcheck.add_argument("--seeds", type=int, default=len(DEFAULT_SEEDS))
    gradcheck.add_argument("--max-entries", type=int, default=None)
    gradcheck.add_argument(
        "--floor", type=float, default=ERROR_FLOOR,
        help=f"smallest relative-error denominator; {DENOMINATOR_FLOOR:g} is the strict check",
    )
    gradcheck.set_defaults(handler=cmd_gradcheck)

    dump = commands.add_parser("dump-kernel", help="sample learned kernels onto a grid")
    dump.add_argument("--checkpoint", required=True)
    dump.add_argument("--grid-size", type=int, default=100)
    dump.add_argument("--tau-max", type=float, default=None)
    dump.add_argument("--out", default=None)
    dump.set_defaults(handler=cmd_dump_kernel)

    print_config = commands.add_parser("print-config", help="show the default run config")
    print_config.set_defaults(handler=cmd_print_config)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    configure_logging(settings.log_level)
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args, settings)
    except CtppError as exc:
        logger.error("%s failed: %s", args.command, exc.detail)
        print(f"❌ {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"❌ invalid arguments: {exc.error_count()} validation error(s)", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
