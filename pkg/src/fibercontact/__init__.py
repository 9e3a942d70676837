"""Contact detection, localization, and force estimation for continuum
manipulators instrumented with a distributed fiber strain sensor.

A two-stage cascade: a boosted-tree detector flags contact frames from a
pooled strain profile, then a conditioned 1-D CNN maps the full profile to
a per-segment force distribution whose peak gives contact location and
force magnitude.
"""

from .core import (
    ArcGrid,
    ConfigError,
    Side,
    StrainFrame,
    TrainingDivergedError,
    Trial,
    TrialFormatError,
    segment_center,
    segment_index,
)
from .evaluation import (
    EvalReport,
    MetricUndefined,
    cross_validate,
    mae,
    oracle_cascade,
    precision_recall,
    roc_auc,
    run_cascade,
)
from .forcenet import (
    ForceDistributionNet,
    NetSpec,
    TrainOptions,
    decode_distribution,
    encode_targets,
)
from .gbdt import GbdtModel, GbdtParams, classify, fit_gbdt, fit_gbdt_arrays, predict_proba
from .synth import SynthConfig, make_benchmark_dataset, simulate_trial
from .trialio import read_trial, replay, write_trial

__version__ = "0.1.0"

__all__ = [
    "ArcGrid",
    "ConfigError",
    "EvalReport",
    "ForceDistributionNet",
    "GbdtModel",
    "GbdtParams",
    "MetricUndefined",
    "NetSpec",
    "Side",
    "StrainFrame",
    "SynthConfig",
    "TrainOptions",
    "TrainingDivergedError",
    "Trial",
    "TrialFormatError",
    "classify",
    "cross_validate",
    "decode_distribution",
    "encode_targets",
    "fit_gbdt",
    "fit_gbdt_arrays",
    "mae",
    "make_benchmark_dataset",
    "oracle_cascade",
    "precision_recall",
    "predict_proba",
    "read_trial",
    "replay",
    "roc_auc",
    "run_cascade",
    "segment_center",
    "segment_index",
    "simulate_trial",
    "write_trial",
    "__version__",
]
