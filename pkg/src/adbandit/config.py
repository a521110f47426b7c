"""Experiment configuration: parsing, validation, and derived structures.

A config file is one JSON object holding the experiment identity, the
creatives and target audiences under test, payoff inputs, the context
probability source (explicit table or reference sample), the stopping
threshold and Monte Carlo draw count, the batch schedule, the seed, and the
synthetic-traffic scenario. The combination cap binds at the decision level
(creatives x target audiences <= 25); the internal context grid is allowed
to be finer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import audiences
from .audiences import ContextProbabilities, DisjointAudience, TargetAudienceDef
from .bandit import PayoffModel
from .errors import ConfigError
from .simulator import CostSpec, GroundTruth

MAX_CREATIVES = 5
MAX_TAS = 5
MAX_COMBINATIONS = 25

DEFAULT_THRESHOLD = 0.90
DEFAULT_MC_DRAWS = 10_000
DEFAULT_REPORT_SEED = 0
DEFAULT_CI_LEVEL = 0.95

KIND_CREATIVE = "creative-experiment"
KIND_TARGET_AUDIENCE = "target-audience-experiment"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    creatives: tuple[str, ...]
    target_audiences: tuple[TargetAudienceDef, ...]
    gamma: float
    display_costs: Optional[list]
    context_probs_raw: dict
    threshold: float
    mc_draws: int
    batch_size: int
    max_batches: int
    seed: int
    scenario_raw: dict = field(repr=False)

    @property
    def R(self) -> int:
        return len(self.creatives)

    @property
    def K(self) -> int:
        return len(self.target_audiences)

    @property
    def J(self) -> int:
        return 2**self.K - 1

    @property
    def kind(self) -> str:
        return KIND_CREATIVE if self.R > 1 else KIND_TARGET_AUDIENCE

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        fields_err: dict[str, str] = {}

        experiment_id = raw.get("experiment_id")
        if not experiment_id or not isinstance(experiment_id, str):
            fields_err["experiment_id"] = "required non-empty string"
            experiment_id = ""

        creatives = raw.get("creatives") or []
        if not isinstance(creatives, list) or len(creatives) == 0:
            fields_err["creatives"] = "required non-empty list of creative ids"
            creatives = []
        creatives = tuple(str(c) for c in creatives)
        if len(set(creatives)) != len(creatives):
            fields_err["creatives"] = "creative ids must be distinct"

        tas_raw = raw.get("target_audiences") or []
        if not isinstance(tas_raw, list) or len(tas_raw) == 0:
            fields_err["target_audiences"] = "required non-empty list"
            tas_raw = []

        # the combination cap is checked first so it stays observable even
        # when a per-side cap is violated at the same time
        if creatives and tas_raw and len(creatives) * len(tas_raw) > MAX_COMBINATIONS:
            raise ConfigError(
                f"{len(creatives)}x{len(tas_raw)} combinations exceed the cap of {MAX_COMBINATIONS}",
                fields={"creatives": "reduce creatives or audiences"},
                code="too_many_arms",
            )
        if len(creatives) > MAX_CREATIVES:
            raise ConfigError(
                f"at most {MAX_CREATIVES} creatives, got {len(creatives)}",
                fields={"creatives": f"limit is {MAX_CREATIVES}"},
                code="too_many_creatives",
            )
        if len(tas_raw) > MAX_TAS:
            raise ConfigError(
                f"at most {MAX_TAS} target audiences, got {len(tas_raw)}",
                fields={"target_audiences": f"limit is {MAX_TAS}"},
                code="too_many_audiences",
            )
        tas = tuple(TargetAudienceDef.from_dict(t) for t in tas_raw)
        ids = sorted(t.ta_id for t in tas)
        if tas and ids != list(range(1, len(tas) + 1)):
            fields_err["target_audiences"] = f"ta_ids must be 1..{len(tas)}, got {ids}"

        threshold = float(raw.get("threshold", DEFAULT_THRESHOLD))
        if not 0.5 < threshold < 1.0:
            raise ConfigError(
                f"threshold must lie in (0.5, 1), got {threshold}",
                fields={"threshold": "must lie strictly between 0.5 and 1"},
                code="invalid_threshold",
            )

        gamma = float(raw.get("gamma", 1.0))
        if gamma <= 0:
            fields_err["gamma"] = "must be positive"

        mc_draws = int(raw.get("mc_draws", DEFAULT_MC_DRAWS))
        if mc_draws < 1000:
            fields_err["mc_draws"] = "need at least 1000 Monte Carlo draws"

        batch_size = int(raw.get("batch_size", 1000))
        if batch_size < 1:
            fields_err["batch_size"] = "must be at least 1"

        max_batches = int(raw.get("max_batches", 100))
        if max_batches < 1:
            fields_err["max_batches"] = "must be at least 1"

        seed = int(raw.get("seed", 0))

        context_probs_raw = raw.get("context_probs")
        if not isinstance(context_probs_raw, dict) or not (
            "table" in context_probs_raw or "reference_sample" in context_probs_raw
        ):
            fields_err["context_probs"] = "need {'table': ...} or {'reference_sample': ...}"
            context_probs_raw = {}

        scenario_raw = raw.get("scenario")
        if not isinstance(scenario_raw, dict) or "true_ctr" not in scenario_raw:
            fields_err["scenario"] = "need a scenario with 'true_ctr'"
            scenario_raw = {}

        if fields_err:
            raise ConfigError(
                "config validation failed: " + "; ".join(f"{k}: {v}" for k, v in fields_err.items()),
                fields=fields_err,
            )

        cfg = cls(
            experiment_id=experiment_id,
            creatives=creatives,
            target_audiences=tas,
            gamma=gamma,
            display_costs=raw.get("display_costs"),
            context_probs_raw=context_probs_raw,
            threshold=threshold,
            mc_draws=mc_draws,
            batch_size=batch_size,
            max_batches=max_batches,
            seed=seed,
            scenario_raw=scenario_raw,
        )
        # fail fast on structurally-bad tables and scenarios
        das = cfg.build_partition()
        cfg.build_probs(das)
        cfg.build_payoff()
        cfg.build_ground_truth()
        return cfg

    def build_tas(self) -> tuple[TargetAudienceDef, ...]:
        return self.target_audiences

    def build_partition(self) -> list[DisjointAudience]:
        return audiences.partition(self.target_audiences)

    def build_probs(self, das: list[DisjointAudience]) -> ContextProbabilities:
        raw = self.context_probs_raw
        if "table" in raw:
            return audiences.context_probs_from_table(raw["table"], das, self.K)
        return audiences.estimate_context_probs(raw["reference_sample"], self.target_audiences, das)

    def build_payoff(self) -> PayoffModel:
        if self.display_costs is None:
            return PayoffModel.ctr_only(self.R, self.J, gamma=self.gamma)
        costs = np.asarray(self.display_costs, dtype=float)
        if costs.ndim == 0:
            costs = np.full((self.R, self.J), float(costs))
        if costs.shape != (self.R, self.J):
            raise ConfigError(
                f"display_costs must be scalar or {self.R}x{self.J}, got {costs.shape}",
                fields={"display_costs": "shape mismatch"},
            )
        return PayoffModel(gamma=self.gamma, display_cost=costs)

    def build_ground_truth(self) -> GroundTruth:
        raw = self.scenario_raw
        true_ctr = np.asarray(raw["true_ctr"], dtype=float)
        if true_ctr.shape != (self.R, self.J):
            raise ConfigError(
                f"scenario true_ctr must be {self.R}x{self.J}, got {true_ctr.shape}",
                fields={"scenario": "true_ctr shape mismatch"},
            )
        weights = raw.get("context_weights")
        if weights is None:
            raise ConfigError("scenario needs 'context_weights'", fields={"scenario": "missing context_weights"})
        gt = GroundTruth(
            true_ctr=true_ctr,
            cost=CostSpec.from_config(raw.get("cost"), self.R, self.J),
            context_weights=np.asarray(weights, dtype=float),
            no_context_weight=float(raw.get("no_context_weight", 0.0)),
        )
        gt.validate()
        return gt

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "creatives": list(self.creatives),
            "target_audiences": [t.to_dict() for t in self.target_audiences],
            "gamma": self.gamma,
            "display_costs": self.display_costs,
            "context_probs": self.context_probs_raw,
            "threshold": self.threshold,
            "mc_draws": self.mc_draws,
            "batch_size": self.batch_size,
            "max_batches": self.max_batches,
            "seed": self.seed,
            "scenario": self.scenario_raw,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()
