"""Evolutionary pipeline for windowed multichannel signal classification.

Stages: ingest (load/resample/window raw recordings), statistical feature
extraction, information-gain attribute selection evolved with a speciated
genetic algorithm, MLP topology search under the same engine, LSTM
training with a unit-count sweep, adaptive boosting of either model, and
a benchmark harness that ties it all together behind one master seed.
"""

__version__ = "0.1.0"

from .crossval import evaluate, stratified_folds
from .data import FeatureDataset, load_feature_csv, write_feature_csv
from .ensemble import BoostedEnsemble, boost, predict
from .evolution import (
    EvoConfig,
    EvoTrace,
    Individual,
    TopologyGenome,
    breed,
    evolve,
    init_population,
    tournament_select,
)
from .features import (
    FeatureConfig,
    extract,
    feature_catalog,
    fft_features,
    log_covariance,
    log_energy_entropy,
    quarter_derivatives,
    shannon_entropy,
    window_moments,
)
from .harness import ExperimentConfig, ExperimentReport, load_config, run_experiment
from .ingest import (
    RawRecording,
    UniformSignal,
    WindowedSignal,
    load_mindbigdata,
    make_windows,
    resample,
    synth_recording,
)
from .lstm import LstmModel, LstmTrainConfig, bptt_train, cell_step, forward_sequence, unit_sweep
from .mlp import MlpModel, TrainConfig, backprop_step, cv_accuracy, forward, loss, train
from .selection import (
    AttributeMask,
    class_entropy,
    info_gain,
    one_r,
    project,
    subset_fitness,
)
from .serialize import load_model, save_model

__all__ = [
    "FeatureDataset", "load_feature_csv", "write_feature_csv",
    "RawRecording", "UniformSignal", "WindowedSignal",
    "resample", "make_windows", "load_mindbigdata", "synth_recording",
    "FeatureConfig", "extract", "feature_catalog", "window_moments",
    "quarter_derivatives", "log_covariance", "shannon_entropy",
    "log_energy_entropy", "fft_features",
    "AttributeMask", "class_entropy", "info_gain", "one_r",
    "subset_fitness", "project",
    "EvoConfig", "EvoTrace", "Individual", "TopologyGenome",
    "init_population", "tournament_select", "breed", "evolve",
    "MlpModel", "TrainConfig", "forward", "loss", "backprop_step",
    "train", "cv_accuracy",
    "LstmModel", "LstmTrainConfig", "cell_step", "forward_sequence",
    "bptt_train", "unit_sweep",
    "BoostedEnsemble", "boost", "predict",
    "stratified_folds", "evaluate",
    "ExperimentConfig", "ExperimentReport", "load_config", "run_experiment",
    "save_model", "load_model",
]
