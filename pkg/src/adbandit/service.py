"""HTTP facade over the experiment manager.

The API is intentionally thin: every route delegates to the manager, every
error surfaces as ``{"code", "message", "fields"}`` with a meaningful HTTP
status, and every success envelope carries ``experiment_id``, ``status``,
and the batch cursor ``t`` so clients can render state without extra
round trips. Reports are fully computed server-side.

An optional background scheduler advances eligible experiments one batch
per tick, which turns the service into a self-driving simulator for demos
and the dashboard.
"""

from __future__ import annotations

import threading
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .errors import (
    AdbanditError,
    DuplicateId,
    InvalidStatus,
    InvalidTransition,
    UnknownExperiment,
)
from .manager import ExperimentManager

_STATUS_CODES = (
    (UnknownExperiment, 404),
    (DuplicateId, 409),
    (InvalidStatus, 409),
    (InvalidTransition, 409),
    (AdbanditError, 400),
)


def _http_status(exc: AdbanditError) -> int:
    for klass, status in _STATUS_CODES:
        if isinstance(exc, klass):
            return status
    return 400


def _error_body(exc: AdbanditError) -> dict:
    body = {"code": exc.code, "message": str(exc)}
    fields = getattr(exc, "fields", None)
    if fields:
        body["fields"] = fields
    return body


class Scheduler:
    """Advances every eligible experiment one batch per tick."""

    def __init__(self, manager: ExperimentManager, interval: float):
        self.manager = manager
        self.interval = interval
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _run(self) -> None:
        while not self._stop.wait(self.interval):
            self.tick()

    def tick(self) -> int:
        advanced = 0
        for experiment_id in self.manager.ids():
            try:
                self.manager.advance(experiment_id, batches=1)
                advanced += 1
            except AdbanditError:
                continue
        return advanced


def create_app(
    manager: Optional[ExperimentManager] = None,
    data_dir: Optional[str] = None,
    tick_interval: Optional[float] = None,
) -> FastAPI:
    if manager is None:
        manager = ExperimentManager(data_dir=data_dir)
    app = FastAPI(title="adbandit", version="1.0")
    app.state.manager = manager
    app.state.scheduler = None

    if tick_interval:
        scheduler = Scheduler(manager, tick_interval)
        app.state.scheduler = scheduler

        @app.on_event("startup")
        def _start_scheduler() -> None:
            scheduler.start()

        @app.on_event("shutdown")
        def _stop_scheduler() -> None:
            scheduler.stop()

    @app.exception_handler(AdbanditError)
    async def _domain_error(request: Request, exc: AdbanditError) -> JSONResponse:
        return JSONResponse(status_code=_http_status(exc), content=_error_body(exc))

    @app.post("/experiments")
    async def create_experiment(payload: dict) -> dict:
        return manager.create(payload)

    @app.get("/experiments")
    async def list_experiments() -> dict:
        return {"experiments": manager.list_summaries()}

    @app.get("/experiments/{experiment_id}")
    async def get_experiment(experiment_id: str) -> dict:
        return manager.summary(experiment_id)

    @app.post("/experiments/{experiment_id}/start")
    async def start_experiment(experiment_id: str) -> dict:
        return manager.command(experiment_id, "start")

    @app.post("/experiments/{experiment_id}/pause")
    async def pause_experiment(experiment_id: str) -> dict:
        return manager.command(experiment_id, "pause")

    @app.post("/experiments/{experiment_id}/resume")
    async def resume_experiment(experiment_id: str) -> dict:
        return manager.command(experiment_id, "resume")

    @app.post("/experiments/{experiment_id}/stop")
    async def stop_experiment(experiment_id: str) -> dict:
        return manager.command(experiment_id, "stop")

    @app.post("/experiments/{experiment_id}/advance")
    async def advance_experiment(
        experiment_id: str, batches: int = Query(default=1, ge=1, le=10_000)
    ) -> dict:
        return manager.advance(experiment_id, batches=batches)

    @app.post("/experiments/{experiment_id}/apply-winner")
    async def apply_winner(experiment_id: str) -> dict:
        return manager.apply_winner(experiment_id)

    @app.get("/experiments/{experiment_id}/report")
    async def get_report(
        experiment_id: str,
        level: float = Query(default=0.95, gt=0.0, lt=1.0),
        draws: Optional[int] = Query(default=None, ge=1000, le=1_000_000),
        report_seed: int = Query(default=0, ge=0),
    ) -> dict:
        return manager.report(
            experiment_id, level=level, draws=draws, report_seed=report_seed
        )

    @app.get("/experiments/{experiment_id}/history")
    async def get_history(experiment_id: str) -> dict:
        return manager.history(experiment_id)

    return app
