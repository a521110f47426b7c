"""Record API fixtures for the dashboard tests.

Boots the engine's HTTP service on a scratch data directory, drives a few
experiments into distinct lifecycle states over plain HTTP, and saves the
raw response bodies under tests/fixtures/. Rerun after any API change:

    python3 scripts/record_fixtures.py
"""

import copy
import json
import pathlib
import subprocess
import tempfile
import time

import httpx

PORT = 8437
BASE = f"http://127.0.0.1:{PORT}"
HERE = pathlib.Path(__file__).resolve().parent
FIXTURES = HERE.parent / "tests" / "fixtures"
CASE_STUDY = HERE.parent.parent / "configs" / "case_study.json"


def wait_for_server(client: httpx.Client) -> None:
    for _ in range(100):
        try:
            client.get("/experiments")
            return
        except httpx.HTTPError:
            time.sleep(0.1)
    raise RuntimeError("service did not come up")


def save(name: str, body: dict) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    path = FIXTURES / f"{name}.json"
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(HERE.parent)}")


def main() -> None:
    base_config = json.loads(CASE_STUDY.read_text())

    flat = copy.deepcopy(base_config)
    flat["experiment_id"] = "midrun"
    flat["batch_size"] = 500
    flat["scenario"]["true_ctr"] = [[0.02] * 3 for _ in range(3)]

    with tempfile.TemporaryDirectory() as data_dir:
        server = subprocess.Popen(
            ["adbandit", "serve", "--host", "127.0.0.1", "--port", str(PORT), "--data-dir", data_dir],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        try:
            with httpx.Client(base_url=BASE, timeout=120) as client:
                wait_for_server(client)

                def post(path: str) -> dict:
                    response = client.post(path)
                    response.raise_for_status()
                    return response.json()

                def get(path: str) -> dict:
                    response = client.get(path)
                    response.raise_for_status()
                    return response.json()

                client.post("/experiments", json=base_config).raise_for_status()
                post("/experiments/case-study/start")
                post("/experiments/case-study/advance?batches=100")
                save("summary_completed", get("/experiments/case-study"))
                save("report_completed", get("/experiments/case-study/report"))
                save("history_completed", get("/experiments/case-study/history"))

                client.post("/experiments", json=flat).raise_for_status()
                post("/experiments/midrun/start")
                post("/experiments/midrun/advance?batches=3")
                save("summary_running", get("/experiments/midrun"))
                save("report_running", get("/experiments/midrun/report"))
                save("history_running", get("/experiments/midrun/history"))

                for state, experiment_id, commands in [
                    ("draft", "idle", []),
                    ("paused", "parked", ["start", "pause"]),
                    ("stopped", "halted", ["start", "stop"]),
                ]:
                    cfg = copy.deepcopy(flat)
                    cfg["experiment_id"] = experiment_id
                    client.post("/experiments", json=cfg).raise_for_status()
                    for command in commands:
                        post(f"/experiments/{experiment_id}/{command}")
                    save(f"summary_{state}", get(f"/experiments/{experiment_id}"))

                save("list", get("/experiments"))
        finally:
            server.terminate()
            server.wait(timeout=10)


if __name__ == "__main__":
    main()
