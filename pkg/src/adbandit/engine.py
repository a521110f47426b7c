"""Experiment lifecycle and the batch loop.

One batch mirrors the production data path: sample arrivals, serve each
in-context impression against the frozen posterior snapshot, realize
outcomes, append impression/click log records, fold the batch's records
into per-cell counts (the aggregator step), apply the conjugate update,
re-evaluate the best-combination probabilities, and check the stopping
threshold.

Lifecycle: draft -> running -> {paused, stopped, completed};
paused -> {running, stopped}. Completed is entered when the best
probability crosses the threshold; the operator may explicitly continue
running batches afterwards (the status stays completed and reports flag the
continuation). Stopped and completed end the loop but reports stay
available. The whole trajectory is a deterministic function of
(config, seed), and a snapshot taken between batches restores exactly,
including every stream cursor.
"""

from __future__ import annotations

import hashlib
import json
from typing import Optional, Sequence

import numpy as np

from . import bandit, rng as rngmod, simulator
from .bandit import BatchStats, PosteriorGrid
from .config import ExperimentConfig
from .errors import CorruptSnapshot, InvalidStatus, InvalidTransition
from .simulator import LogRecord

DRAFT = "draft"
RUNNING = "running"
PAUSED = "paused"
STOPPED = "stopped"
COMPLETED = "completed"

STATUSES = (DRAFT, RUNNING, PAUSED, STOPPED, COMPLETED)

# action -> (allowed source statuses, target status)
TRANSITIONS = {
    "start": ((DRAFT,), RUNNING),
    "pause": ((RUNNING,), PAUSED),
    "resume": ((PAUSED,), RUNNING),
    "stop": ((RUNNING, PAUSED), STOPPED),
}

SNAPSHOT_SCHEMA = "adbandit-snapshot-v1"


class Experiment:
    """Mutable state of one experiment; owned by a single batch loop."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.tas = config.build_tas()
        self.das = config.build_partition()
        self.probs = config.build_probs(self.das)
        self.payoff = config.build_payoff()
        self.ground_truth = config.build_ground_truth()
        self.grid: PosteriorGrid = bandit.init_priors(config.R, config.J, cell_cap=None)
        self.streams = rngmod.spawn_streams(config.seed)
        self.status = DRAFT
        self.threshold_crossed = False
        self.continuing = False
        self.stop_reason: Optional[str] = None
        self.cum_impressions = np.zeros((config.R, config.J), dtype=np.int64)
        self.cum_clicks = np.zeros((config.R, config.J), dtype=np.int64)
        self.cum_cost = np.zeros((config.R, config.J))
        self.phi_history: list[np.ndarray] = []
        self.events: list[dict] = []
        # records observed by this process; a restore starts a fresh segment
        self.log_records: list[LogRecord] = []

    # -- derived ----------------------------------------------------------

    @property
    def experiment_id(self) -> str:
        return self.config.experiment_id

    @property
    def batches_run(self) -> int:
        return self.grid.t - 1

    @property
    def max_phi(self) -> Optional[float]:
        if not self.phi_history:
            return None
        return float(self.phi_history[-1].max())

    def best_combination(self) -> Optional[tuple[int, int]]:
        """(r, k) 0-based argmax of the latest best-probability matrix."""
        if not self.phi_history:
            return None
        flat = int(np.argmax(self.phi_history[-1]))
        return divmod(flat, self.config.K)

    def loop_eligible(self) -> bool:
        if self.batches_run >= self.config.max_batches:
            return False
        return self.status == RUNNING or (self.status == COMPLETED and self.continuing)

    # -- lifecycle --------------------------------------------------------

    def apply(self, action: str) -> None:
        if action not in TRANSITIONS:
            raise InvalidTransition(f"unknown action {action!r}")
        if action == "resume" and self.status == COMPLETED:
            # explicit operator continuation past the threshold
            self.continuing = True
            return
        sources, target = TRANSITIONS[action]
        if self.status not in sources:
            raise InvalidTransition(f"cannot {action} from status {self.status!r}")
        self.status = target
        if action == "stop":
            self.stop_reason = "operator"

    def start(self) -> None:
        self.apply("start")

    def pause(self) -> None:
        self.apply("pause")

    def resume(self) -> None:
        self.apply("resume")

    def stop(self) -> None:
        self.apply("stop")

    # -- the batch loop ---------------------------------------------------

    def run_batch(self) -> list[LogRecord]:
        """Advance one batch; returns the records it appended."""
        if not (self.status == RUNNING or (self.status == COMPLETED and self.continuing)):
            raise InvalidStatus(f"cannot run a batch in status {self.status!r}")
        if self.batches_run >= self.config.max_batches:
            raise InvalidStatus("max batches reached")

        t = self.grid.t
        contexts = simulator.sample_batch(
            self.ground_truth, self.config.batch_size, self.streams["arrival"]
        )
        in_experiment = contexts >= 0
        ordinals = np.nonzero(in_experiment)[0]
        ctx = contexts[in_experiment]
        chosen = bandit.choose_creatives_batch(self.grid, self.payoff, ctx, self.streams["alloc"])
        clicked, costs = simulator.realize_outcomes_batch(
            self.ground_truth, ctx, chosen, self.streams["outcome"]
        )
        records = [
            LogRecord(
                t=t,
                i=int(ordinals[u]),
                da_id=int(ctx[u]) + 1,
                creative=int(chosen[u]) + 1,
                clicked=int(clicked[u]),
                cost=float(costs[u]),
            )
            for u in range(len(ordinals))
        ]
        self.log_records.extend(records)

        stats = aggregate_batch(records, self.config.R, self.config.J, self.config.batch_size)
        self.grid = bandit.update(self.grid, stats)
        evaluation = bandit.best_combo_probability(
            self.grid,
            self.payoff,
            self.probs,
            draws=self.config.mc_draws,
            rng=self.streams["eval"],
        )
        self.phi_history.append(evaluation.best_prob)
        self.cum_impressions += stats.n
        self.cum_clicks += stats.s
        np.add.at(self.cum_cost, (chosen, ctx), costs)

        if not self.threshold_crossed and self.max_phi >= self.config.threshold:
            self.threshold_crossed = True
            if self.status == RUNNING:
                self.status = COMPLETED
        if self.batches_run >= self.config.max_batches:
            if self.status == RUNNING:
                self.status = STOPPED
                self.stop_reason = "max_batches"
            elif self.status == COMPLETED:
                self.continuing = False
        return records

    # -- consistency ------------------------------------------------------

    def verify_ledger(self) -> None:
        """Posterior parameters, counters, and (when the in-memory log spans
        the whole run) raw log sums must agree exactly."""
        assert np.array_equal(self.grid.alpha, 1 + self.cum_clicks.astype(float))
        assert np.array_equal(
            self.grid.beta, 1 + (self.cum_impressions - self.cum_clicks).astype(float)
        )
        if self.log_records and self.log_records[0].t == 1:
            n = np.zeros_like(self.cum_impressions)
            s = np.zeros_like(self.cum_clicks)
            for rec in self.log_records:
                n[rec.creative - 1, rec.da_id - 1] += 1
                s[rec.creative - 1, rec.da_id - 1] += rec.clicked
            assert np.array_equal(n, self.cum_impressions)
            assert np.array_equal(s, self.cum_clicks)

    # -- persistence ------------------------------------------------------

    def snapshot(self) -> dict:
        body = {
            "schema": SNAPSHOT_SCHEMA,
            "config_hash": self.config.config_hash(),
            "status": self.status,
            "threshold_crossed": self.threshold_crossed,
            "continuing": self.continuing,
            "stop_reason": self.stop_reason,
            "posterior": bandit.serialize_posterior(
                self.grid, self.experiment_id, self.config.gamma
            ),
            "cumulative": {
                "impressions": self.cum_impressions.tolist(),
                "clicks": self.cum_clicks.tolist(),
                "cost": self.cum_cost.tolist(),
            },
            "phi_history": [m.tolist() for m in self.phi_history],
            "rng": rngmod.streams_state(self.streams),
            "events": self.events,
        }
        body["checksum"] = _checksum(body)
        return body

    @classmethod
    def restore(cls, snapshot: dict, config: ExperimentConfig) -> "Experiment":
        if not isinstance(snapshot, dict) or snapshot.get("schema") != SNAPSHOT_SCHEMA:
            raise CorruptSnapshot("unrecognized snapshot schema")
        body = {k: v for k, v in snapshot.items() if k != "checksum"}
        if "checksum" not in snapshot or _checksum(body) != snapshot["checksum"]:
            raise CorruptSnapshot("checksum mismatch")
        if snapshot["config_hash"] != config.config_hash():
            raise CorruptSnapshot("snapshot belongs to a different config")
        exp = cls(config)
        grid, _, _ = bandit.parse_posterior(snapshot["posterior"])
        exp.grid = grid
        exp.status = snapshot["status"]
        exp.threshold_crossed = bool(snapshot["threshold_crossed"])
        exp.continuing = bool(snapshot["continuing"])
        exp.stop_reason = snapshot.get("stop_reason")
        cum = snapshot["cumulative"]
        exp.cum_impressions = np.asarray(cum["impressions"], dtype=np.int64)
        exp.cum_clicks = np.asarray(cum["clicks"], dtype=np.int64)
        exp.cum_cost = np.asarray(cum["cost"], dtype=float)
        exp.phi_history = [np.asarray(m, dtype=float) for m in snapshot["phi_history"]]
        exp.streams = rngmod.restore_streams(snapshot["rng"])
        exp.events = list(snapshot.get("events", []))
        return exp

    def save_snapshot(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.snapshot(), fh)

    @classmethod
    def load_snapshot(cls, path, config: ExperimentConfig) -> "Experiment":
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except (OSError, ValueError) as exc:
            raise CorruptSnapshot(f"unreadable snapshot: {exc}") from exc
        return cls.restore(payload, config)


def _checksum(body: dict) -> str:
    return hashlib.sha256(
        json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def aggregate_batch(
    records: Sequence[LogRecord], R: int, J: int, total_users: int
) -> BatchStats:
    """The aggregator step: fold one batch's log records into cell counts."""
    n = np.zeros((R, J), dtype=np.int64)
    s = np.zeros((R, J), dtype=np.int64)
    for rec in records:
        n[rec.creative - 1, rec.da_id - 1] += 1
        s[rec.creative - 1, rec.da_id - 1] += rec.clicked
    return BatchStats(n=n, s=s, total_users=total_users)
