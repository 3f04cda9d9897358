"""Command-line entry points for the pipeline stages.

Exit codes: 0 success, 2 config error, 3 data error, 4 training failure.
"""
from __future__ import annotations

import functools
import json
import sys
from dataclasses import replace as dc_replace
from pathlib import Path

import click
import numpy as np

from . import ensemble as ensemble_mod
from . import harness as harness_mod
from . import ingest as ingest_mod
from . import lstm as lstm_mod
from . import mlp as mlp_mod
from .data import load_feature_csv, write_feature_csv
from .errors import ConfigError, DataError, PipelineError, TrainingError
from .evolution import EvoConfig, TopologyGenome, evolve
from .features import FeatureConfig, extract, feature_catalog
from .seeds import derive_seed
from .selection import project, save_mask
from .serialize import save_model

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4


def _exit_code(exc: PipelineError) -> int:
    cause = exc.cause if isinstance(exc, harness_mod.StageError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, DataError):
        return EXIT_DATA
    if isinstance(cause, TrainingError):
        return EXIT_TRAINING
    return EXIT_DATA


def pipeline_command(fn):
    """Shared flags plus the error-to-exit-code mapping."""

    @click.option("--config", "config_path", type=click.Path(), required=True,
                  help="Flat key-value experiment config.")
    @click.option("--seed", type=int, default=None, help="Override the config seed.")
    @click.option("--out", "out_dir", type=click.Path(), default=None,
                  help="Output directory (overrides config).")
    @click.option("--threads", type=int, default=None, help="Worker threads.")
    @functools.wraps(fn)
    def wrapper(config_path, seed, out_dir, threads, **kwargs):
        try:
            config = harness_mod.load_config(config_path)
            if seed is not None:
                config = dc_replace(config, seed=seed)
            if threads is not None:
                config = dc_replace(config, threads=threads)
            out = Path(out_dir) if out_dir else (Path(config.out) if config.out else Path("."))
            out.mkdir(parents=True, exist_ok=True)
            fn(config, out, **kwargs)
        except PipelineError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


@click.group()
def main():
    """Evolutionary pipeline for windowed signal classification."""


@main.command()
@pipeline_command
def synth(config, out):
    """Generate synthetic recordings and write them as recording CSVs."""
    recordings = ingest_mod.synth_recording(
        list(config.synth_classes), config.synth_duration, config.synth_channels,
        seed=derive_seed(config.seed, 1), base_rate=config.synth_base_rate)
    for i, rec in enumerate(recordings):
        target = out / f"recording_{i}_{rec.label}.csv"
        ingest_mod.write_recording_csv(rec, target)
        click.echo(f"wrote {target}")


def _load_pipeline_dataset(config):
    dataset, groups, channels, feature_config = harness_mod._ingest_stage(config)
    return dataset, groups, channels, feature_config


@main.command(name="extract")
@pipeline_command
def extract_cmd(config, out):
    """Ingest the configured source and write features.csv + catalog."""
    dataset, _groups, channels, feature_config = _load_pipeline_dataset(config)
    write_feature_csv(dataset, out / "features.csv")
    if channels is not None:
        (out / "feature_catalog.json").write_text(
            json.dumps(feature_catalog(feature_config, channels), indent=2),
            encoding="utf-8")
    click.echo(f"wrote {out / 'features.csv'} ({dataset.n_rows} rows x "
               f"{dataset.n_features} columns)")


@main.command()
@pipeline_command
def select(config, out):
    """Evolve an attribute mask and write the projected dataset."""
    dataset, _groups, _channels, _fc = _load_pipeline_dataset(config)
    mask, gains, trace = harness_mod._run_selection(
        dataset, config, derive_seed(config.seed, 3))
    save_mask(mask, dataset.feature_names, out / "mask.txt")
    trace.save(out / "selection_trace.json")
    projected = project(dataset, mask)
    write_feature_csv(projected, out / "selected_features.csv")
    chosen = mask.indices()
    payload = {
        "chosen": int(len(chosen)),
        "column_names": [dataset.feature_names[i] for i in chosen],
        "info_gain": {dataset.feature_names[i]: float(gains[i]) for i in chosen},
        "fitness_trajectory": trace.best_fitnesses(),
    }
    (out / "selection.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(f"selected {len(chosen)} of {dataset.n_features} columns")


@main.command(name="evolve-mlp")
@pipeline_command
def evolve_mlp(config, out):
    """Search hidden-layer topology for the MLP and save the best model."""
    dataset, _groups, _channels, _fc = _load_pipeline_dataset(config)
    search_config = mlp_mod.TrainConfig(
        epochs=config.mlp_search_epochs, learning_rate=config.mlp_learning_rate,
        momentum=config.mlp_momentum, decay=config.mlp_decay, seed=0)

    def fitness(genome, seed):
        cfg = dc_replace(search_config, seed=seed)
        return mlp_mod.cv_accuracy(genome, dataset, config.mlp_search_folds, cfg)

    evo_config = EvoConfig(population=config.mlp_search_population,
                           generations=config.mlp_search_generations,
                           mutation_rate=config.mlp_search_mutation_rate,
                           seed=derive_seed(config.seed, 5))
    trace = evolve(evo_config, TopologyGenome.sample, fitness)
    trace.save(out / "mlp_search_trace.json")
    best = trace.best.best_genome
    final_config = mlp_mod.TrainConfig(
        epochs=config.mlp_epochs, learning_rate=config.mlp_learning_rate,
        momentum=config.mlp_momentum, decay=config.mlp_decay,
        seed=derive_seed(config.seed, 6))
    model = mlp_mod.train(best, dataset, final_config)
    save_model(model, out / "mlp_model.npz")
    click.echo(f"best topology {best.layers}, cv fitness "
               f"{trace.best.best_fitness:.2f}%, model saved")


@main.command(name="train-lstm")
@pipeline_command
def train_lstm(config, out):
    """Train an LSTM with the first configured unit count and save it."""
    dataset, groups, _channels, _fc = _load_pipeline_dataset(config)
    units = config.lstm_units[0]
    cfg = lstm_mod.LstmTrainConfig(
        epochs=config.lstm_epochs, batch_size=config.lstm_batch_size,
        learning_rate=config.lstm_learning_rate,
        seed=derive_seed(config.seed, 8), sequence_len=config.lstm_sequence_len)
    model = lstm_mod.bptt_train(dataset, units, cfg, groups=groups)
    save_model(model, out / "lstm_model.npz")
    click.echo(f"trained {units}-unit lstm, model saved")


@main.command(name="sweep-lstm")
@pipeline_command
def sweep_lstm(config, out):
    """Cross-validate every configured unit count and write sweep.csv."""
    dataset, groups, _channels, _fc = _load_pipeline_dataset(config)
    cfg = lstm_mod.LstmTrainConfig(
        epochs=config.lstm_epochs, batch_size=config.lstm_batch_size,
        learning_rate=config.lstm_learning_rate,
        seed=derive_seed(config.seed, 7), sequence_len=config.lstm_sequence_len)
    sweep = lstm_mod.unit_sweep(dataset, list(config.lstm_units), cfg,
                                folds=config.folds, groups=groups,
                                threads=config.threads)
    harness_mod._write_csv_rows(out / "sweep.csv", ["units", "accuracy"],
                                [[u, f"{a:.4f}"] for u, a in sweep])
    for u, a in sweep:
        click.echo(f"{u:>5} units: {a:6.2f}%")


@main.command()
@click.option("--model", "model_kind", type=click.Choice(["mlp", "lstm"]), default="mlp",
              help="Base learner to boost.")
@pipeline_command
def boost(config, out, model_kind):
    """Boost the configured base learner and save the ensemble."""
    dataset, groups, _channels, _fc = _load_pipeline_dataset(config)
    if model_kind == "mlp":
        weak_config = mlp_mod.TrainConfig(
            epochs=config.boost_mlp_epochs, learning_rate=config.mlp_learning_rate,
            momentum=config.mlp_momentum, decay=config.mlp_decay, seed=0)
        topology = TopologyGenome([16])

        def trainer(sample_ds, seed):
            return mlp_mod.train(topology, sample_ds, dc_replace(weak_config, seed=seed))

        booster = ensemble_mod.boost(trainer, dataset,
                                     estimators=config.boost_estimators,
                                     seed=derive_seed(config.seed, 9))
    else:
        flat = lstm_mod.sequence_dataset(dataset, config.lstm_sequence_len, groups=groups)
        lstm_config = lstm_mod.LstmTrainConfig(
            epochs=config.boost_lstm_epochs, batch_size=config.lstm_batch_size,
            learning_rate=config.lstm_learning_rate, seed=0,
            sequence_len=config.lstm_sequence_len)
        width = dataset.n_features

        def trainer(sample_flat, seed):
            rows = sample_flat.rows.reshape(-1, width)
            unflat = harness_mod.FeatureDataset(
                feature_names=dataset.feature_names, rows=rows,
                labels=np.repeat(sample_flat.labels, config.lstm_sequence_len),
                class_names=list(sample_flat.class_names))
            unflat_groups = np.repeat(np.arange(sample_flat.n_rows),
                                      config.lstm_sequence_len)
            return lstm_mod.bptt_train(unflat, config.lstm_units[0],
                                       dc_replace(lstm_config, seed=seed),
                                       groups=unflat_groups)

        booster = ensemble_mod.boost(trainer, flat,
                                     estimators=config.boost_estimators,
                                     seed=derive_seed(config.seed, 10))
    save_model(booster, out / f"boosted_{model_kind}.npz")
    click.echo(f"boosted {model_kind}: {len(booster.members)} stages, "
               f"alphas {[round(a, 3) for a in booster.alphas]}")


@main.command()
@pipeline_command
def bench(config, out):
    """Run the full experiment and write report.json plus CSV tables."""
    report = harness_mod.run_experiment(config, out_dir=out)
    results = report.payload.get("results", {})
    for name, entry in results.items():
        click.echo(f"{name}: {entry['accuracy']:.2f}%")
    click.echo(f"report written to {out / 'report.json'}")


@main.command()
@click.option("--in", "report_path", type=click.Path(exists=True), required=True,
              help="Path to a report.json.")
def report(report_path):
    """Pretty-print a previously written report."""
    payload = json.loads(Path(report_path).read_text(encoding="utf-8"))
    click.echo(f"mode: {payload.get('mode')}  seed: {payload.get('seed')}")
    dataset = payload.get("dataset", {})
    click.echo(f"dataset: {dataset.get('kind')} "
               f"({dataset.get('rows')} rows x {dataset.get('columns')} columns)")
    sel = payload.get("selection", {})
    if sel.get("enabled"):
        click.echo(f"selection: {sel.get('chosen')} columns; "
                   f"oner {sel.get('oner', {}).get('accuracy', float('nan')):.2f}%")
    for name, entry in payload.get("results", {}).items():
        click.echo(f"{name:>16}: {entry['accuracy']:6.2f}%")
    timings = payload.get("timings", {})
    if timings:
        click.echo("timings: " + ", ".join(f"{k}={v:.1f}s" for k, v in timings.items()))


if __name__ == "__main__":
    main()
