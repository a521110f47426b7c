import copy
import json
import os

import pytest

HERE = os.path.dirname(__file__)
CASE_STUDY_PATH = os.path.join(HERE, os.pardir, "configs", "case_study.json")


def load_case_study() -> dict:
    with open(CASE_STUDY_PATH) as fh:
        return json.load(fh)


def small_config(**overrides) -> dict:
    """A fast two-TA scenario for unit tests; override freely."""
    raw = {
        "experiment_id": "unit",
        "creatives": ["a", "b", "c"],
        "target_audiences": [
            {
                "ta_id": 1,
                "name": "young",
                "predicate": [{"feature": "age", "range": [18, 34]}],
            },
            {
                "ta_id": 2,
                "name": "urban",
                "predicate": [{"feature": "region", "in": ["metro"]}],
            },
        ],
        "gamma": 1.0,
        "context_probs": {
            "table": [[7 / 13, 0.0], [0.0, 7 / 13], [6 / 13, 6 / 13]]
        },
        "threshold": 0.9,
        "mc_draws": 2000,
        "batch_size": 500,
        "max_batches": 40,
        "seed": 11,
        "scenario": {
            "true_ctr": [
                [0.019143, 0.022857, 0.021],
                [0.025429, 0.023571, 0.0245],
                [0.025714, 0.043171, 0.035],
            ],
            "context_weights": [0.35, 0.35, 0.30],
            "no_context_weight": 0.0,
            "cost": None,
        },
    }
    for key, value in overrides.items():
        raw[key] = copy.deepcopy(value)
    return raw


@pytest.fixture
def case_study_config() -> dict:
    return load_case_study()
