"""Adaptive ad experimentation with a contextual Thompson sampler.

Creatives are tested against overlapping target audiences by partitioning
users into disjoint contexts, learning a Beta posterior per
creative/context cell, and steering traffic with one posterior draw per
impression. Experiments stop themselves once one creative/audience
combination is the probable best at a configured confidence.
"""

from .audiences import (
    Clause,
    ContextProbabilities,
    DisjointAudience,
    TargetAudienceDef,
    assign_context,
    estimate_context_probs,
    overlap_map,
    partition,
)
from .bandit import (
    BatchStats,
    BestProbabilities,
    PayoffModel,
    PosteriorGrid,
    aggregate_ta_ctr,
    allocation_weights,
    best_combo_probability,
    choose_creative,
    credible_interval,
    init_priors,
    parse_posterior,
    serialize_posterior,
    update,
)
from .config import ExperimentConfig
from .engine import Experiment, aggregate_batch
from .errors import (
    AdbanditError,
    ConfigError,
    CorruptSnapshot,
    DegenerateReport,
    DuplicateId,
    EmptyInput,
    EmptyTargetAudience,
    InvalidStatus,
    InvalidTransition,
    MalformedStats,
    MissingFeature,
    SingleCreative,
    TooManyArms,
    UnknownExperiment,
)
from .manager import ExperimentManager
from .reports import build_report, value_of_adaptive_design, value_of_experimentation
from .simulator import CostSpec, GroundTruth, LogRecord, format_log

__version__ = "0.1.0"

__all__ = [
    "AdbanditError",
    "BatchStats",
    "BestProbabilities",
    "Clause",
    "ConfigError",
    "ContextProbabilities",
    "CorruptSnapshot",
    "CostSpec",
    "DegenerateReport",
    "DisjointAudience",
    "DuplicateId",
    "EmptyInput",
    "EmptyTargetAudience",
    "Experiment",
    "ExperimentConfig",
    "ExperimentManager",
    "GroundTruth",
    "InvalidStatus",
    "InvalidTransition",
    "LogRecord",
    "MalformedStats",
    "MissingFeature",
    "PayoffModel",
    "PosteriorGrid",
    "SingleCreative",
    "TargetAudienceDef",
    "TooManyArms",
    "UnknownExperiment",
    "aggregate_batch",
    "aggregate_ta_ctr",
    "allocation_weights",
    "assign_context",
    "best_combo_probability",
    "build_report",
    "choose_creative",
    "credible_interval",
    "estimate_context_probs",
    "format_log",
    "init_priors",
    "overlap_map",
    "parse_posterior",
    "partition",
    "serialize_posterior",
    "update",
    "value_of_adaptive_design",
    "value_of_experimentation",
]
