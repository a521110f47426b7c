"""Command-line front end.

Every command works against one of two interchangeable backends: the
in-process manager (with an on-disk data directory, so state survives
between invocations) or a running HTTP service via ``--server``. Exit
codes mirror the API statuses: 2 for invalid input, 3 for unknown
experiment, 4 for an illegal command in the current status, 5 for a
connection failure.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Optional

import click
import httpx

from .errors import AdbanditError
from .manager import ExperimentManager
from .service import _http_status

DEFAULT_DATA_DIR = os.environ.get("ADBANDIT_DATA_DIR", "./adbandit-data")

EXIT_CODES = {400: 2, 404: 3, 409: 4}


class CliFailure(click.ClickException):
    def __init__(self, payload: dict, http_status: int):
        message = payload.get("message") or payload.get("code") or "request failed"
        super().__init__(message)
        self.exit_code = EXIT_CODES.get(http_status, 1)
        self.payload = payload

    def show(self, file=None) -> None:
        click.echo(f"error: {self.message}", err=True)
        fields = self.payload.get("fields")
        if fields:
            for name, detail in sorted(fields.items()):
                click.echo(f"  {name}: {detail}", err=True)


class LocalBackend:
    def __init__(self, data_dir: str):
        self.manager = ExperimentManager(data_dir=data_dir)

    def _call(self, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AdbanditError as exc:
            body = {"code": exc.code, "message": str(exc)}
            if getattr(exc, "fields", None):
                body["fields"] = exc.fields
            raise CliFailure(body, _http_status(exc)) from exc

    def create(self, payload):
        return self._call(self.manager.create, payload)

    def command(self, experiment_id, action):
        return self._call(self.manager.command, experiment_id, action)

    def advance(self, experiment_id, batches):
        return self._call(self.manager.advance, experiment_id, batches=batches)

    def run_to_completion(self, experiment_id):
        return self._call(self.manager.run_to_completion, experiment_id)

    def apply_winner(self, experiment_id):
        return self._call(self.manager.apply_winner, experiment_id)

    def summary(self, experiment_id):
        return self._call(self.manager.summary, experiment_id)

    def list_summaries(self):
        return self._call(self.manager.list_summaries)

    def report(self, experiment_id, **params):
        return self._call(self.manager.report, experiment_id, **params)

    def history(self, experiment_id):
        return self._call(self.manager.history, experiment_id)


class HttpBackend:
    def __init__(self, server: str):
        self.client = httpx.Client(base_url=server, timeout=300.0)

    def _request(self, method: str, path: str, **kwargs) -> dict:
        try:
            response = self.client.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            failure = CliFailure({"message": f"cannot reach server: {exc}"}, 0)
            failure.exit_code = 5
            raise failure from exc
        try:
            payload = response.json()
        except ValueError:
            payload = {"message": response.text}
        if response.status_code >= 400:
            raise CliFailure(payload, response.status_code)
        return payload

    def create(self, payload):
        return self._request("POST", "/experiments", json=payload)

    def command(self, experiment_id, action):
        return self._request("POST", f"/experiments/{experiment_id}/{action}")

    def advance(self, experiment_id, batches):
        return self._request(
            "POST",
            f"/experiments/{experiment_id}/advance",
            params={"batches": batches},
        )

    def run_to_completion(self, experiment_id):
        summary = self._request("GET", f"/experiments/{experiment_id}")
        if summary["status"] == "draft":
            summary = self.command(experiment_id, "start")
        while summary["status"] == "running" or (
            summary["status"] == "completed" and summary.get("continuing")
        ):
            summary = self.advance(experiment_id, batches=25)
        return summary

    def apply_winner(self, experiment_id):
        return self._request("POST", f"/experiments/{experiment_id}/apply-winner")

    def summary(self, experiment_id):
        return self._request("GET", f"/experiments/{experiment_id}")

    def list_summaries(self):
        return self._request("GET", "/experiments")["experiments"]

    def report(self, experiment_id, **params):
        query = {
            key: value
            for key, value in params.items()
            if value is not None
        }
        return self._request(
            "GET", f"/experiments/{experiment_id}/report", params=query
        )

    def history(self, experiment_id):
        return self._request("GET", f"/experiments/{experiment_id}/history")


def _load_config(path: str, seed: Optional[int]) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    if seed is not None:
        payload["seed"] = seed
    return payload


def _emit(payload: dict, fmt: str, renderer=None) -> None:
    if fmt == "raw" or renderer is None:
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(renderer(payload))


def _render_summary(summary: dict) -> str:
    lines = [
        f"experiment   {summary['experiment_id']}",
        f"status       {summary['status']}"
        + (" (continuing)" if summary.get("continuing") else ""),
        f"kind         {summary['kind']}",
        f"batches run  {summary['batches_run']} (t={summary['t']})",
        f"grid         {summary['creatives']} creatives x "
        f"{summary['target_audiences']} audiences ({summary['contexts']} contexts)",
        f"threshold    {summary['threshold']}"
        + (" crossed" if summary.get("threshold_crossed") else ""),
    ]
    if summary.get("max_phi") is not None:
        best = summary["best"]
        lines.append(
            f"best         creative {best['creative']} / audience {best['ta_id']} "
            f"(prob {summary['max_phi']:.4f})"
        )
    totals = summary["totals"]
    lines.append(
        f"totals       {totals['impressions']} impressions, {totals['clicks']} clicks"
    )
    if summary.get("stop_reason"):
        lines.append(f"stop reason  {summary['stop_reason']}")
    return "\n".join(lines)


def _render_report(report: dict) -> str:
    lines = [
        f"experiment {report['experiment_id']}  status {report['status']}  "
        f"batches {report['batches_run']}",
        "",
        "combination        ctr      95% interval        P(best)   share",
    ]
    for combo in report["combinations"]:
        lo, hi = combo["ctr_ci"]
        lines.append(
            f"  r{combo['creative']} x ta{combo['ta_id']}"
            f"      {combo['ctr_mean']:.5f}"
            f"  [{lo:.5f}, {hi:.5f}]"
            f"  {combo['best_prob']:7.4f}"
            f"  {combo['impression_share']:6.4f}"
        )
    best = report["best"]
    lines.append("")
    lines.append(
        f"best: creative {best['creative']} / audience {best['ta_id']} "
        f"with probability {best['best_prob']:.4f} "
        f"(threshold {report['threshold']})"
    )
    totals = report["totals"]
    lines.append(
        f"totals: {totals['impressions']} impressions, {totals['clicks']} clicks, "
        f"cost {totals['cost']:.2f}"
    )
    if report.get("value_of_experimentation") is not None:
        lines.append(
            f"value of experimentation: {report['value_of_experimentation']:.4f}"
        )
    if report.get("value_of_adaptive_design") is not None:
        lines.append(
            f"value of adaptive design: {report['value_of_adaptive_design']:.4f}"
        )
    return "\n".join(lines)


def _render_history(history: dict) -> str:
    lines = [
        f"experiment {history['experiment_id']}  status {history['status']}  "
        f"batches {history['batches']}",
        "batch   max P(best)",
    ]
    for point in history["points"]:
        best = max(max(row) for row in point["best_prob"])
        lines.append(f"{point['t']:5d}   {best:.4f}")
    return "\n".join(lines)


pass_backend = click.make_pass_decorator(object)


@click.group()
@click.option("--server", default=None, help="Base URL of a running service.")
@click.option(
    "--data-dir",
    default=DEFAULT_DATA_DIR,
    show_default=True,
    help="Local state directory (ignored with --server).",
)
@click.pass_context
def main(ctx: click.Context, server: Optional[str], data_dir: str) -> None:
    """Adaptive ad experimentation from the command line."""
    if ctx.invoked_subcommand == "serve":
        ctx.obj = None
        return
    ctx.obj = HttpBackend(server) if server else LocalBackend(data_dir)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@pass_backend
def create(backend, config_path: str, seed: Optional[int], fmt: str) -> None:
    """Register a new experiment from a JSON config."""
    summary = backend.create(_load_config(config_path, seed))
    _emit(summary, fmt, _render_summary)


def _command_command(action: str, help_text: str):
    @main.command(name=action, help=help_text)
    @click.option("--id", "experiment_id", required=True)
    @click.option(
        "--format", "fmt", type=click.Choice(["table", "raw"]), default="table"
    )
    @pass_backend
    def _cmd(backend, experiment_id: str, fmt: str) -> None:
        summary = backend.command(experiment_id, action)
        _emit(summary, fmt, _render_summary)

    return _cmd


_command_command("start", "Start a draft experiment.")
_command_command("pause", "Pause a running experiment.")
_command_command("resume", "Resume a paused experiment (or continue past completion).")
_command_command("stop", "Stop an experiment for good.")


@main.command()
@click.option("--id", "experiment_id", required=True)
@click.option("--batches", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@pass_backend
def advance(backend, experiment_id: str, batches: int, fmt: str) -> None:
    """Run a fixed number of batches."""
    summary = backend.advance(experiment_id, batches)
    _emit(summary, fmt, _render_summary)


@main.command()
@click.option("--id", "experiment_id", required=True)
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@pass_backend
def status(backend, experiment_id: str, fmt: str) -> None:
    """Show one experiment's summary."""
    _emit(backend.summary(experiment_id), fmt, _render_summary)


@main.command(name="list")
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@pass_backend
def list_experiments(backend, fmt: str) -> None:
    """List all known experiments."""
    summaries = backend.list_summaries()
    if fmt == "raw":
        click.echo(json.dumps(summaries, indent=2))
        return
    if not summaries:
        click.echo("no experiments")
        return
    for summary in summaries:
        click.echo(
            f"{summary['experiment_id']:24s} {summary['status']:10s} "
            f"batches={summary['batches_run']}"
        )


@main.command()
@click.option("--id", "experiment_id", required=True)
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option("--draws", type=int, default=None)
@click.option("--report-seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@pass_backend
def report(
    backend,
    experiment_id: str,
    level: float,
    draws: Optional[int],
    report_seed: int,
    fmt: str,
) -> None:
    """Build and print the current report."""
    payload = backend.report(
        experiment_id, level=level, draws=draws, report_seed=report_seed
    )
    _emit(payload, fmt, _render_report)


@main.command()
@click.option("--id", "experiment_id", required=True)
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@pass_backend
def history(backend, experiment_id: str, fmt: str) -> None:
    """Print the per-batch best-probability trajectory."""
    _emit(backend.history(experiment_id), fmt, _render_history)


@main.command(name="run-to-completion")
@click.option("--id", "experiment_id", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="table")
@pass_backend
def run_to_completion(
    backend,
    experiment_id: Optional[str],
    config_path: Optional[str],
    seed: Optional[int],
    fmt: str,
) -> None:
    """Drive an experiment until it completes or hits its batch cap."""
    if (experiment_id is None) == (config_path is None):
        raise click.UsageError("provide exactly one of --id or --config")
    if config_path is not None:
        summary = backend.create(_load_config(config_path, seed))
        experiment_id = summary["experiment_id"]
    backend.run_to_completion(experiment_id)
    payload = backend.report(experiment_id)
    _emit(payload, fmt, _render_report)


@main.command(name="apply-winner")
@click.option("--id", "experiment_id", required=True)
@click.option("--format", "fmt", type=click.Choice(["table", "raw"]), default="raw")
@pass_backend
def apply_winner(backend, experiment_id: str, fmt: str) -> None:
    """Record the winning combination once the threshold is crossed."""
    _emit(backend.apply_winner(experiment_id), fmt, None)


@main.command()
@click.option("--host", default=lambda: os.environ.get("ADBANDIT_HOST", "127.0.0.1"))
@click.option(
    "--port", type=int, default=lambda: int(os.environ.get("ADBANDIT_PORT", "8000"))
)
@click.option("--data-dir", default=DEFAULT_DATA_DIR, show_default=True)
@click.option(
    "--tick-interval",
    type=float,
    default=None,
    help="Advance eligible experiments every N seconds.",
)
def serve(host: str, port: int, data_dir: str, tick_interval: Optional[float]) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=data_dir, tick_interval=tick_interval)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
