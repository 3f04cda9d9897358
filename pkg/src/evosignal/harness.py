"""Experiment harness: config parsing, the end-to-end pipeline, and
machine-readable reports.

A run goes ingest -> feature extraction -> evolutionary attribute
selection -> topology-searched MLP, unit-swept LSTM, and boosted
variants of each, all cross-validated from one master seed. Reports are
JSON plus flat CSV tables; timing fields are the only content that is
not bit-reproducible for a fixed seed.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import ensemble as ensemble_mod
from . import ingest as ingest_mod
from . import lstm as lstm_mod
from . import mlp as mlp_mod
from .crossval import evaluate, stratified_folds
from .data import FeatureDataset, write_feature_csv
from .errors import ConfigError, DataError, StageError
from .evolution import EvoConfig, TopologyGenome, evolve
from .features import GROUP_ORDER, FeatureConfig, extract, feature_catalog
from .seeds import derive_seed
from .selection import (
    AttributeMask,
    one_r,
    project,
    rank_columns,
    save_mask,
    subset_fitness,
)

DATA_DIR_ENV = "DEVO_DATA_DIR"

_STAGE_SEEDS = {
    "synth": 1, "ingest": 2, "selection": 3, "oner": 4,
    "mlp_search": 5, "mlp_eval": 6, "lstm_sweep": 7, "lstm_eval": 8,
    "boost_mlp": 9, "boost_lstm": 10,
}

_DEFAULT_SYNTH = (("low", 4.0, 10.0, 0.5), ("mid", 10.0, 10.0, 0.5), ("high", 30.0, 10.0, 0.5))


@dataclass
class ExperimentConfig:
    """Typed view of the flat key-value config file."""

    version: int = 1
    seed: int = 0
    folds: int = 10
    threads: int = 1
    out: str | None = None
    selection_mode: str = "full"  # full | per_fold

    dataset_kind: str = "synthetic"  # synthetic | recording_csv | feature_csv | mindbigdata
    dataset_path: str | None = None

    synth_classes: tuple = _DEFAULT_SYNTH
    synth_duration: float = 60.0
    synth_channels: int = 4
    synth_base_rate: float = 256.0

    rate: float = 200.0
    per_class_limit: int = 15
    window_len: float = 1.0
    stride: float = 0.5

    feature_groups: tuple = tuple(GROUP_ORDER)
    fft_bins: int = 50
    epsilon: float = 1e-8

    selection_enabled: bool = True
    selection_population: int = 20
    selection_generations: int = 20
    selection_bins: int = 10
    selection_penalty: float = 0.01
    selection_mutation_rate: float = 0.05
    selection_init_density: float = 0.5
    selection_tournament: int = 3
    selection_switch_rate: float = 0.05

    mlp_enabled: bool = True
    mlp_search_population: int = 20
    mlp_search_generations: int = 10
    mlp_search_folds: int = 3
    mlp_search_epochs: int = 30
    mlp_search_mutation_rate: float = 0.3
    mlp_epochs: int = 500
    mlp_learning_rate: float = 0.3
    mlp_momentum: float = 0.2
    mlp_decay: float = 0.0

    lstm_enabled: bool = True
    lstm_units: tuple = (25, 50, 75, 100, 125)
    lstm_epochs: int = 50
    lstm_batch_size: int = 50
    lstm_learning_rate: float = 0.001
    lstm_sequence_len: int = 10

    boost_enabled: bool = True
    boost_estimators: int = 10
    boost_mlp_epochs: int = 5
    boost_lstm_epochs: int = 10

    def validate(self) -> None:
        problems = []
        if self.selection_mode not in ("full", "per_fold"):
            problems.append(f"selection_mode must be full or per_fold, got {self.selection_mode!r}")
        if self.dataset_kind not in ("synthetic", "recording_csv", "feature_csv", "mindbigdata"):
            problems.append(f"unknown dataset.kind {self.dataset_kind!r}")
        if self.dataset_kind != "synthetic" and not self.dataset_path:
            problems.append("dataset.path is required for non-synthetic sources")
        if self.folds < 2:
            problems.append("folds must be >= 2")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if not 0 < self.stride <= self.window_len:
            problems.append("window.stride must be in (0, window.length]")
        if self.rate <= 0:
            problems.append("ingest.rate must be positive")
        unknown = set(self.feature_groups) - set(GROUP_ORDER)
        if unknown:
            problems.append(f"unknown feature groups {sorted(unknown)}")
        if not self.lstm_units:
            problems.append("lstm.units must be non-empty")
        if problems:
            raise ConfigError("; ".join(problems))

    def resolved_path(self) -> Path | None:
        if self.dataset_path is None:
            return None
        path = Path(self.dataset_path)
        root = os.environ.get(DATA_DIR_ENV)
        if root and not path.is_absolute():
            path = Path(root) / path
        return path

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1", "on"):
        return True
    if text.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_synth_classes(text: str) -> tuple:
    entries = []
    for item in text.replace(",", " ").split():
        parts = item.split(":")
        if len(parts) != 4:
            raise ValueError(f"class spec must be label:freq:amp:noise, got {item!r}")
        entries.append((parts[0], float(parts[1]), float(parts[2]), float(parts[3])))
    if not entries:
        raise ValueError("synth.classes is empty")
    return tuple(entries)


def _parse_int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _parse_groups(text: str) -> tuple:
    return tuple(x for x in text.replace(",", " ").split())


_KEYMAP = {
    "config_version": ("version", int),
    "seed": ("seed", int),
    "folds": ("folds", int),
    "threads": ("threads", int),
    "out": ("out", str),
    "selection_mode": ("selection_mode", str),
    "dataset.kind": ("dataset_kind", str),
    "dataset.path": ("dataset_path", str),
    "synth.classes": ("synth_classes", _parse_synth_classes),
    "synth.duration": ("synth_duration", float),
    "synth.channels": ("synth_channels", int),
    "synth.base_rate": ("synth_base_rate", float),
    "ingest.rate": ("rate", float),
    "ingest.per_class_limit": ("per_class_limit", int),
    "window.length": ("window_len", float),
    "window.stride": ("stride", float),
    "features.groups": ("feature_groups", _parse_groups),
    "features.fft_bins": ("fft_bins", int),
    "features.epsilon": ("epsilon", float),
    "selection.enabled": ("selection_enabled", _parse_bool),
    "selection.population": ("selection_population", int),
    "selection.generations": ("selection_generations", int),
    "selection.bins": ("selection_bins", int),
    "selection.penalty": ("selection_penalty", float),
    "selection.mutation_rate": ("selection_mutation_rate", float),
    "selection.init_density": ("selection_init_density", float),
    "selection.tournament": ("selection_tournament", int),
    "selection.species_switch_rate": ("selection_switch_rate", float),
    "mlp.enabled": ("mlp_enabled", _parse_bool),
    "mlp.search.population": ("mlp_search_population", int),
    "mlp.search.generations": ("mlp_search_generations", int),
    "mlp.search.folds": ("mlp_search_folds", int),
    "mlp.search.epochs": ("mlp_search_epochs", int),
    "mlp.search.mutation_rate": ("mlp_search_mutation_rate", float),
    "mlp.epochs": ("mlp_epochs", int),
    "mlp.learning_rate": ("mlp_learning_rate", float),
    "mlp.momentum": ("mlp_momentum", float),
    "mlp.decay": ("mlp_decay", float),
    "lstm.enabled": ("lstm_enabled", _parse_bool),
    "lstm.units": ("lstm_units", _parse_int_list),
    "lstm.epochs": ("lstm_epochs", int),
    "lstm.batch_size": ("lstm_batch_size", int),
    "lstm.learning_rate": ("lstm_learning_rate", float),
    "lstm.sequence_len": ("lstm_sequence_len", int),
    "boost.enabled": ("boost_enabled", _parse_bool),
    "boost.estimators": ("boost_estimators", int),
    "boost.mlp_epochs": ("boost_mlp_epochs", int),
    "boost.lstm_epochs": ("boost_lstm_epochs", int),
}


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse the flat ``key = value`` format; the whole file validates
    before any work begins."""
    values = {}
    problems = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{line_no}: expected 'key = value'")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYMAP:
            problems.append(f"{source}:{line_no}: unknown key {key!r}")
            continue
        attr, parser = _KEYMAP[key]
        try:
            values[attr] = parser(value)
        except ValueError as exc:
            problems.append(f"{source}:{line_no}: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))
    config = ExperimentConfig(**values)
    config.validate()
    return config


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


class MaskedModel:
    """Applies a fixed column selection before delegating prediction."""

    def __init__(self, inner, indices):
        self.inner = inner
        self.indices = np.asarray(indices, dtype=int)
        self.kind = getattr(inner, "kind", "masked")

    @property
    def class_names(self):
        return self.inner.class_names

    def predict_rows(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[None, :]
        return self.inner.predict_rows(rows[:, self.indices])


@dataclass
class ExperimentReport:
    payload: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return self.payload

    def comparable(self) -> dict:
        """Report content with the non-deterministic timing fields removed."""
        clone = json.loads(json.dumps(self.payload))
        clone.pop("timings", None)
        return clone

    def save(self, path) -> None:
        _atomic_write_json(self.payload, path)


def _atomic_write_json(payload: dict, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    os.replace(tmp, path)


def _write_csv_rows(path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(str(x) for x in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _ingest_stage(config: ExperimentConfig):
    """Produce (dataset, per-row recording ids, channel labels)."""
    feature_config = FeatureConfig(enabled_groups=frozenset(config.feature_groups),
                                   fft_bins_kept=config.fft_bins, epsilon=config.epsilon)
    kind = config.dataset_kind
    if kind == "feature_csv":
        dataset = ingest_mod.load_feature_csv(config.resolved_path())
        return dataset, None, None, feature_config

    if kind == "synthetic":
        recordings = ingest_mod.synth_recording(
            list(config.synth_classes), config.synth_duration, config.synth_channels,
            seed=derive_seed(config.seed, _STAGE_SEEDS["synth"]),
            base_rate=config.synth_base_rate)
    elif kind == "recording_csv":
        path = config.resolved_path()
        files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
        if not files:
            raise DataError(f"no recording CSVs under {path}")
        recordings = [ingest_mod.load_recording_csv(f) for f in files]
    elif kind == "mindbigdata":
        recordings = ingest_mod.load_mindbigdata(
            config.resolved_path(), per_class_limit=config.per_class_limit,
            seed=derive_seed(config.seed, _STAGE_SEEDS["ingest"]))
    else:  # pragma: no cover - validate() rejects other kinds
        raise ConfigError(f"unhandled dataset kind {kind}")

    parts, groups = [], []
    channels = None
    for rec_id, rec in enumerate(recordings):
        uniform = ingest_mod.resample(rec, config.rate)
        windowed = ingest_mod.make_windows(uniform, config.window_len, config.stride)
        part = extract(windowed, feature_config, threads=config.threads)
        parts.append(part)
        groups.extend([rec_id] * part.n_rows)
        channels = rec.channels
    dataset = FeatureDataset.concat(parts)
    return dataset, np.asarray(groups, dtype=object), channels, feature_config


def _run_selection(dataset: FeatureDataset, config: ExperimentConfig, seed: int):
    gains = rank_columns(dataset, config.selection_bins, threads=config.threads)
    evo_config = EvoConfig(population=config.selection_population,
                           generations=config.selection_generations,
                           tournament_size=config.selection_tournament,
                           mutation_rate=config.selection_mutation_rate,
                           species_switch_rate=config.selection_switch_rate,
                           elitism=1, seed=seed)

    def fitness(mask, _seed):
        return subset_fitness(dataset, mask, bins=config.selection_bins,
                              penalty=config.selection_penalty, column_gains=gains)

    def sampler(rng):
        return AttributeMask.sample(dataset.n_features, rng,
                                    density=config.selection_init_density)

    trace = evolve(evo_config, sampler, fitness)
    return trace.best.best_genome, gains, trace


def _cv_eval(fit, dataset: FeatureDataset, folds: int, seed: int,
             audit=None, stage: str = "") -> tuple[float, np.ndarray]:
    """Cross-validate a fit closure; returns (accuracy %, summed confusion)."""
    labels = dataset.labels.astype(str)
    assignment = stratified_folds(labels, folds, seed=seed)
    k = len(dataset.class_names)
    total = np.zeros((k, k), dtype=int)
    for f in range(folds):
        train_idx = np.flatnonzero(assignment != f)
        test_idx = np.flatnonzero(assignment == f)
        if audit is not None:
            audit(stage, f, train_idx.copy())
        model = fit(dataset.take(train_idx), derive_seed(seed, f), f)
        _, confusion = evaluate(model, dataset.rows[test_idx], labels[test_idx])
        total += confusion
    accuracy = 100.0 * np.trace(total) / total.sum()
    return float(accuracy), total


def run_experiment(config: ExperimentConfig, out_dir=None, audit=None) -> ExperimentReport:
    """Execute the full pipeline per the config and write report artifacts.

    Reports are bit-reproducible for a fixed master seed apart from the
    timing fields. On a stage failure the partial report is flushed to
    ``report_partial.json`` and a StageError names the failed stage.
    """
    config.validate()
    out = Path(out_dir) if out_dir else (Path(config.out) if config.out else None)
    if out:
        out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    report = {
        "version": 1,
        "mode": config.selection_mode,
        "seed": config.seed,
        "folds": config.folds,
        "config": config.to_json(),
        "timings": timings,
    }
    current_stage = "setup"

    def fail(exc: BaseException):
        if out:
            report["failed_stage"] = current_stage
            report["error"] = str(exc)
            _atomic_write_json(report, out / "report_partial.json")
        raise StageError(current_stage, exc) from exc

    try:
        current_stage = "ingest"
        started = time.perf_counter()
        dataset, groups, channels, feature_config = _ingest_stage(config)
        timings["ingest"] = time.perf_counter() - started
        per_class = {c: int(np.sum(dataset.labels.astype(str) == c))
                     for c in dataset.class_names}
        report["dataset"] = {
            "kind": config.dataset_kind,
            "rows": dataset.n_rows,
            "columns": dataset.n_features,
            "classes": list(dataset.class_names),
            "per_class": per_class,
        }
        if out and channels is not None:
            _atomic_write_json(feature_catalog(feature_config, channels),
                               out / "feature_catalog.json")
    except StageError:
        raise
    except Exception as exc:
        fail(exc)

    strict = config.selection_mode == "per_fold"
    mask = None
    gains = None
    projected = dataset
    try:
        if config.selection_enabled:
            current_stage = "selection"
            started = time.perf_counter()
            mask, gains, trace = _run_selection(
                dataset, config, derive_seed(config.seed, _STAGE_SEEDS["selection"]))
            timings["selection"] = time.perf_counter() - started
            chosen = mask.indices()
            report["selection"] = {
                "enabled": True,
                "chosen": int(len(chosen)),
                "column_names": [dataset.feature_names[i] for i in chosen],
                "info_gain": {dataset.feature_names[i]: float(gains[i]) for i in chosen},
                "fitness_trajectory": trace.best_fitnesses(),
            }
            top = int(np.argmax(gains))
            oner_folds = min(config.folds,
                             min(np.sum(dataset.labels.astype(str) == c)
                                 for c in dataset.class_names))
            oner_acc = one_r(dataset, top, bins=config.selection_bins,
                             folds=max(2, int(oner_folds)),
                             seed=derive_seed(config.seed, _STAGE_SEEDS["oner"]))
            report["selection"]["oner"] = {
                "column": dataset.feature_names[top],
                "info_gain": float(gains[top]),
                "accuracy": oner_acc,
            }
            if not strict:
                projected = project(dataset, mask)
            if out:
                save_mask(mask, dataset.feature_names, out / "mask.txt")
                trace.save(out / "selection_trace.json")
                _write_csv_rows(out / "oner.csv", ["column", "accuracy"],
                                [[dataset.feature_names[top], f"{oner_acc:.4f}"]])
        else:
            report["selection"] = {"enabled": False}
    except StageError:
        raise
    except Exception as exc:
        fail(exc)

    def per_fold_mask(train_ds: FeatureDataset, fold_seed: int) -> AttributeMask:
        fold_mask, _, _ = _run_selection(train_ds, config, fold_seed)
        return fold_mask

    results: dict[str, dict] = {}
    report["results"] = results
    best_topology = None
    best_units = None

    try:
        if config.mlp_enabled:
            current_stage = "mlp_search"
            started = time.perf_counter()
            search_config = mlp_mod.TrainConfig(
                epochs=config.mlp_search_epochs, learning_rate=config.mlp_learning_rate,
                momentum=config.mlp_momentum, decay=config.mlp_decay, seed=0)

            def topology_fitness(genome, seed):
                cfg = replace(search_config, seed=seed)
                return mlp_mod.cv_accuracy(genome, projected, config.mlp_search_folds, cfg)

            evo_config = EvoConfig(population=config.mlp_search_population,
                                   generations=config.mlp_search_generations,
                                   tournament_size=config.selection_tournament,
                                   mutation_rate=config.mlp_search_mutation_rate,
                                   species_switch_rate=config.selection_switch_rate,
                                   elitism=1,
                                   seed=derive_seed(config.seed, _STAGE_SEEDS["mlp_search"]))
            topology_trace = evolve(evo_config, TopologyGenome.sample, topology_fitness)
            best_topology = topology_trace.best.best_genome
            timings["mlp_search"] = time.perf_counter() - started
            report["mlp_search"] = {
                "best_topology": best_topology.to_json(),
                "fitness_trajectory": topology_trace.best_fitnesses(),
            }
            if out:
                topology_trace.save(out / "mlp_search_trace.json")

            current_stage = "mlp_eval"
            started = time.perf_counter()
            train_config = mlp_mod.TrainConfig(
                epochs=config.mlp_epochs, learning_rate=config.mlp_learning_rate,
                momentum=config.mlp_momentum, decay=config.mlp_decay, seed=0)

            def fit_mlp(train_ds, seed, fold):
                cfg = replace(train_config, seed=seed)
                if strict:
                    fold_mask = per_fold_mask(train_ds, derive_seed(seed, 0x5E1))
                    model = mlp_mod.train(best_topology, project(train_ds, fold_mask), cfg)
                    return MaskedModel(model, fold_mask.indices())
                return mlp_mod.train(best_topology, train_ds, cfg)

            eval_ds = dataset if strict else projected
            acc, confusion = _cv_eval(fit_mlp, eval_ds, config.folds,
                                      derive_seed(config.seed, _STAGE_SEEDS["mlp_eval"]),
                                      audit, "mlp")
            timings["mlp_train"] = time.perf_counter() - started
            results["evo_mlp"] = {
                "accuracy": acc,
                "confusion": confusion.tolist(),
                "classes": list(eval_ds.class_names),
                "topology": best_topology.to_json(),
            }
    except StageError:
        raise
    except Exception as exc:
        fail(exc)

    lstm_groups = groups
    try:
        if config.lstm_enabled:
            current_stage = "lstm_sweep"
            started = time.perf_counter()
            lstm_config = lstm_mod.LstmTrainConfig(
                epochs=config.lstm_epochs, batch_size=config.lstm_batch_size,
                learning_rate=config.lstm_learning_rate,
                seed=derive_seed(config.seed, _STAGE_SEEDS["lstm_sweep"]),
                sequence_len=config.lstm_sequence_len)
            sweep = lstm_mod.unit_sweep(projected, list(config.lstm_units), lstm_config,
                                        folds=config.folds, groups=lstm_groups,
                                        threads=config.threads)
            timings["lstm_sweep"] = time.perf_counter() - started
            report["lstm_sweep"] = [[u, a] for u, a in sweep]
            best_units = max(sweep, key=lambda ua: (ua[1], -ua[0]))[0]
            if out:
                _write_csv_rows(out / "sweep.csv", ["units", "accuracy"],
                                [[u, f"{a:.4f}"] for u, a in sweep])

            current_stage = "lstm_eval"
            started = time.perf_counter()
            flat = lstm_mod.sequence_dataset(projected if not strict else dataset,
                                             config.lstm_sequence_len, groups=lstm_groups)
            width = dataset.n_features if strict else projected.n_features
            seq_len = config.lstm_sequence_len

            def fit_lstm(train_flat, seed, fold):
                rows = train_flat.rows.reshape(-1, width)
                names = dataset.feature_names if strict else projected.feature_names
                unflat = FeatureDataset(feature_names=names, rows=rows,
                                        labels=np.repeat(train_flat.labels, seq_len),
                                        class_names=list(train_flat.class_names))
                unflat_groups = np.repeat(np.arange(train_flat.n_rows), seq_len)
                cfg = replace(lstm_config, seed=seed, epochs=config.lstm_epochs)
                if strict:
                    fold_mask = per_fold_mask(unflat, derive_seed(seed, 0x5E2))
                    model = lstm_mod.bptt_train(project(unflat, fold_mask), best_units,
                                                cfg, groups=unflat_groups)
                    flat_idx = [t * width + j for t in range(seq_len)
                                for j in fold_mask.indices()]
                    return MaskedModel(model, flat_idx)
                return lstm_mod.bptt_train(unflat, best_units, cfg, groups=unflat_groups)

            acc, confusion = _cv_eval(fit_lstm, flat, config.folds,
                                      derive_seed(config.seed, _STAGE_SEEDS["lstm_eval"]),
                                      audit, "lstm")
            timings["lstm_train"] = time.perf_counter() - started
            results["lstm"] = {
                "accuracy": acc,
                "confusion": confusion.tolist(),
                "classes": list(flat.class_names),
                "units": int(best_units),
            }
    except StageError:
        raise
    except Exception as exc:
        fail(exc)

    try:
        if config.boost_enabled and config.mlp_enabled:
            current_stage = "boost_mlp"
            started = time.perf_counter()
            weak_config = mlp_mod.TrainConfig(
                epochs=config.boost_mlp_epochs, learning_rate=config.mlp_learning_rate,
                momentum=config.mlp_momentum, decay=config.mlp_decay, seed=0)

            def fit_boost_mlp(train_ds, seed, fold):
                if strict:
                    fold_mask = per_fold_mask(train_ds, derive_seed(seed, 0x5E3))
                    projected_train = project(train_ds, fold_mask)
                else:
                    fold_mask = None
                    projected_train = train_ds

                def weak_trainer(sample_ds, trainer_seed):
                    cfg = replace(weak_config, seed=trainer_seed)
                    return mlp_mod.train(best_topology, sample_ds, cfg)

                booster = ensemble_mod.boost(weak_trainer, projected_train,
                                             estimators=config.boost_estimators, seed=seed)
                if fold_mask is not None:
                    return MaskedModel(booster, fold_mask.indices())
                return booster

            eval_ds = dataset if strict else projected
            acc, confusion = _cv_eval(fit_boost_mlp, eval_ds, config.folds,
                                      derive_seed(config.seed, _STAGE_SEEDS["boost_mlp"]),
                                      audit, "boost_mlp")
            timings["boost_mlp"] = time.perf_counter() - started
            results["boosted_evo_mlp"] = {
                "accuracy": acc,
                "confusion": confusion.tolist(),
                "classes": list(eval_ds.class_names),
                "estimators": config.boost_estimators,
            }

        if config.boost_enabled and config.lstm_enabled:
            current_stage = "boost_lstm"
            started = time.perf_counter()
            flat = lstm_mod.sequence_dataset(projected if not strict else dataset,
                                             config.lstm_sequence_len, groups=lstm_groups)
            width = dataset.n_features if strict else projected.n_features
            seq_len = config.lstm_sequence_len
            lstm_config = lstm_mod.LstmTrainConfig(
                epochs=config.boost_lstm_epochs, batch_size=config.lstm_batch_size,
                learning_rate=config.lstm_learning_rate, seed=0,
                sequence_len=seq_len)

            def fit_boost_lstm(train_flat, seed, fold):
                if strict:
                    all_rows = train_flat.rows.reshape(-1, width)
                    unflat_all = FeatureDataset(feature_names=dataset.feature_names,
                                                rows=all_rows,
                                                labels=np.repeat(train_flat.labels, seq_len),
                                                class_names=list(train_flat.class_names))
                    fold_mask = per_fold_mask(unflat_all, derive_seed(seed, 0x5E4))
                    mask_idx = fold_mask.indices()
                    flat_idx = np.asarray([t * width + j for t in range(seq_len)
                                           for j in mask_idx])
                    inner_names = [dataset.feature_names[j] for j in mask_idx]
                else:
                    flat_idx = None
                    inner_names = projected.feature_names

                def weak_trainer(sample_flat, trainer_seed):
                    flat_rows = (sample_flat.rows if flat_idx is None
                                 else sample_flat.rows[:, flat_idx])
                    rows = flat_rows.reshape(-1, len(inner_names))
                    unflat = FeatureDataset(feature_names=inner_names, rows=rows,
                                            labels=np.repeat(sample_flat.labels, seq_len),
                                            class_names=list(sample_flat.class_names))
                    unflat_groups = np.repeat(np.arange(sample_flat.n_rows), seq_len)
                    cfg = replace(lstm_config, seed=trainer_seed)
                    model = lstm_mod.bptt_train(unflat, best_units, cfg,
                                                groups=unflat_groups)
                    return model if flat_idx is None else MaskedModel(model, flat_idx)

                return ensemble_mod.boost(weak_trainer, train_flat,
                                          estimators=config.boost_estimators, seed=seed)

            acc, confusion = _cv_eval(fit_boost_lstm, flat, config.folds,
                                      derive_seed(config.seed, _STAGE_SEEDS["boost_lstm"]),
                                      audit, "boost_lstm")
            timings["boost_lstm"] = time.perf_counter() - started
            results["boosted_lstm"] = {
                "accuracy": acc,
                "confusion": confusion.tolist(),
                "classes": list(flat.class_names),
                "estimators": config.boost_estimators,
            }
    except StageError:
        raise
    except Exception as exc:
        fail(exc)

    experiment = ExperimentReport(payload=report)
    if out:
        experiment.save(out / "report.json")
        row = [config.dataset_kind]
        header = ["dataset"]
        for key, column in (("evo_mlp", "devo_mlp"), ("lstm", "lstm"),
                            ("boosted_evo_mlp", "ab_devo_mlp"), ("boosted_lstm", "ab_lstm")):
            header.append(column)
            row.append(f"{results[key]['accuracy']:.4f}" if key in results else "")
        _write_csv_rows(out / "results.csv", header, [row])
        if not strict and config.selection_enabled and out:
            write_feature_csv(projected, out / "selected_features.csv")
    return experiment
