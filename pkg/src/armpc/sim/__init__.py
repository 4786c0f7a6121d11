"""Simulation harness: plants, features, episode runner, experiments."""

from .features import FeatureFamily, eval_features, tanh_matched, \
    sin_tanh_unmatched, random_fourier
from .plant import NoiseModel, Plant, plant_step, sample_noise, noise_box, \
    matched_plant, unmatched_plant
from .seeding import make_rng
from .run import (
    EstimatorSpec,
    PriorCalibration,
    Experiment,
    ExperimentState,
    setup_experiment,
    episode_ingredients,
    TraceRecord,
    EpisodeResult,
    matched_experiment,
    unmatched_experiment,
    run_episode,
    run_experiment,
    write_trace_csv,
    read_trace_csv,
    trace_header,
    parallel_map,
)
from .envelope import feasible_fraction, envelope_sweep
from .quadrotor import WindField, quadrotor_experiment, quadrotor_setup

__all__ = [
    "FeatureFamily", "eval_features", "tanh_matched", "sin_tanh_unmatched",
    "random_fourier", "NoiseModel", "Plant", "plant_step", "sample_noise",
    "noise_box", "matched_plant", "unmatched_plant", "make_rng",
    "EstimatorSpec", "PriorCalibration", "Experiment", "ExperimentState",
    "setup_experiment",
    "episode_ingredients", "TraceRecord", "EpisodeResult",
    "matched_experiment", "unmatched_experiment", "run_episode",
    "run_experiment", "write_trace_csv", "read_trace_csv", "trace_header",
    "parallel_map", "feasible_fraction", "envelope_sweep", "WindField",
    "quadrotor_experiment", "quadrotor_setup",
]
