"""In-process experiment registry used by both the CLI and the HTTP service.

Each experiment is guarded by its own lock; lifecycle commands and batch
advances serialize on it, so commands always land on a batch boundary.
Commands are idempotent: repeating one whose target status already holds is
a no-op rather than an error.

With a data directory configured, every mutation persists the config, a
checksummed snapshot (written atomically), and an append-only impression
log in the documented line format; restarting the process reloads all of
it, and replay resumes bit-exactly from the stored stream cursors.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from typing import Optional

from . import reports
from .config import ExperimentConfig
from .engine import DRAFT, RUNNING, COMPLETED, TRANSITIONS, Experiment
from .errors import DuplicateId, InvalidStatus, InvalidTransition, UnknownExperiment
from .simulator import format_log

SNAPSHOT_FILE = "snapshot.json"
CONFIG_FILE = "config.json"
LOG_FILE = "impressions.log"


class _Managed:
    __slots__ = ("exp", "lock")

    def __init__(self, exp: Experiment):
        self.exp = exp
        self.lock = threading.RLock()


class ExperimentManager:
    def __init__(self, data_dir: Optional[str] = None):
        self.data_dir = data_dir
        self._registry: dict[str, _Managed] = {}
        self._registry_lock = threading.Lock()
        if data_dir:
            os.makedirs(data_dir, exist_ok=True)
            self._load_all()

    # -- registry ---------------------------------------------------------

    def create(self, payload: dict) -> dict:
        config = ExperimentConfig.from_dict(payload)
        with self._registry_lock:
            if config.experiment_id in self._registry:
                raise DuplicateId(f"experiment {config.experiment_id!r} already exists")
            managed = _Managed(Experiment(config))
            self._registry[config.experiment_id] = managed
        with managed.lock:
            self._persist(managed.exp, records=None, write_config=True)
            return summarize(managed.exp)

    def ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._registry)

    def _get(self, experiment_id: str) -> _Managed:
        with self._registry_lock:
            try:
                return self._registry[experiment_id]
            except KeyError:
                raise UnknownExperiment(f"no experiment {experiment_id!r}") from None

    def list_summaries(self) -> list[dict]:
        out = []
        for experiment_id in self.ids():
            managed = self._get(experiment_id)
            with managed.lock:
                out.append(summarize(managed.exp))
        return out

    # -- commands ---------------------------------------------------------

    def command(self, experiment_id: str, action: str) -> dict:
        managed = self._get(experiment_id)
        with managed.lock:
            exp = managed.exp
            if action in TRANSITIONS:
                target = TRANSITIONS[action][1]
                already = exp.status == target or (
                    action == "resume" and exp.status == COMPLETED and exp.continuing
                )
                if already:
                    return summarize(exp)
            exp.apply(action)
            self._persist(exp, records=None)
            return summarize(exp)

    def advance(self, experiment_id: str, batches: int = 1) -> dict:
        """Run up to `batches` more batches; stops early at any terminal edge."""
        if batches < 1:
            raise InvalidStatus("batches must be positive")
        managed = self._get(experiment_id)
        with managed.lock:
            exp = managed.exp
            if not exp.loop_eligible():
                raise InvalidStatus(f"cannot advance in status {exp.status!r}")
            appended = []
            for _ in range(batches):
                if not exp.loop_eligible():
                    break
                appended.extend(exp.run_batch())
            self._persist(exp, records=appended)
            return summarize(exp)

    def run_to_completion(self, experiment_id: str) -> dict:
        """Start if needed, then loop until the status leaves running."""
        managed = self._get(experiment_id)
        with managed.lock:
            exp = managed.exp
            if exp.status == DRAFT:
                exp.start()
            if exp.status == COMPLETED and not exp.continuing:
                return summarize(exp)
            if exp.status != RUNNING and not (exp.status == COMPLETED and exp.continuing):
                raise InvalidTransition(
                    f"cannot run to completion from status {exp.status!r}"
                )
            appended = []
            while exp.loop_eligible():
                appended.extend(exp.run_batch())
            self._persist(exp, records=appended)
            return summarize(exp)

    def apply_winner(self, experiment_id: str) -> dict:
        """Record the winning combination; only valid past the threshold."""
        managed = self._get(experiment_id)
        with managed.lock:
            exp = managed.exp
            if not exp.threshold_crossed:
                raise InvalidStatus(
                    "cannot apply a winner before the threshold is crossed"
                )
            best = exp.best_combination()
            event = {
                "event": "apply_winner",
                "t": exp.grid.t,
                "creative": best[0] + 1,
                "ta_id": best[1] + 1,
                "best_prob": exp.max_phi,
            }
            exp.events.append(event)
            self._persist(exp, records=None)
            out = summarize(exp)
            out["applied"] = event
            return out

    # -- views ------------------------------------------------------------

    def summary(self, experiment_id: str) -> dict:
        managed = self._get(experiment_id)
        with managed.lock:
            return summarize(managed.exp)

    def report(
        self,
        experiment_id: str,
        level: float = 0.95,
        draws: Optional[int] = None,
        report_seed: int = 0,
    ) -> dict:
        managed = self._get(experiment_id)
        with managed.lock:
            return reports.build_report(
                managed.exp, level=level, draws=draws, report_seed=report_seed
            )

    def history(self, experiment_id: str, cap: int = 1000) -> dict:
        managed = self._get(experiment_id)
        with managed.lock:
            return reports.history_payload(managed.exp, cap=cap)

    # -- persistence ------------------------------------------------------

    def _exp_dir(self, experiment_id: str) -> str:
        return os.path.join(self.data_dir, experiment_id)

    def _persist(self, exp: Experiment, records, write_config: bool = False) -> None:
        if not self.data_dir:
            return
        folder = self._exp_dir(exp.experiment_id)
        os.makedirs(folder, exist_ok=True)
        if write_config:
            with open(os.path.join(folder, CONFIG_FILE), "w") as fh:
                json.dump(exp.config.to_dict(), fh, indent=2)
        fd, tmp = tempfile.mkstemp(dir=folder, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(exp.snapshot(), fh)
        os.replace(tmp, os.path.join(folder, SNAPSHOT_FILE))
        if records:
            with open(os.path.join(folder, LOG_FILE), "a") as fh:
                fh.write(format_log(records))

    def _load_all(self) -> None:
        for name in sorted(os.listdir(self.data_dir)):
            folder = os.path.join(self.data_dir, name)
            config_path = os.path.join(folder, CONFIG_FILE)
            snapshot_path = os.path.join(folder, SNAPSHOT_FILE)
            if not (os.path.isfile(config_path) and os.path.isfile(snapshot_path)):
                continue
            with open(config_path) as fh:
                config = ExperimentConfig.from_dict(json.load(fh))
            exp = Experiment.load_snapshot(snapshot_path, config)
            self._registry[config.experiment_id] = _Managed(exp)


def summarize(exp: Experiment) -> dict:
    best = exp.best_combination()
    return {
        "experiment_id": exp.experiment_id,
        "status": exp.status,
        "t": exp.grid.t,
        "batches_run": exp.batches_run,
        "kind": exp.config.kind,
        "creatives": exp.config.R,
        "target_audiences": exp.config.K,
        "contexts": exp.config.J,
        "threshold": exp.config.threshold,
        "threshold_crossed": exp.threshold_crossed,
        "continuing": exp.continuing,
        "stop_reason": exp.stop_reason,
        "max_phi": exp.max_phi,
        "best": None
        if best is None
        else {"creative": best[0] + 1, "ta_id": best[1] + 1},
        "totals": {
            "impressions": int(exp.cum_impressions.sum()),
            "clicks": int(exp.cum_clicks.sum()),
        },
    }
