import json

import numpy as np
import pytest

from adbandit.config import ExperimentConfig
from adbandit.engine import Experiment
from adbandit.errors import DegenerateReport, SingleCreative
from adbandit.reports import (
    build_report,
    counterfactual_equal_split,
    history_payload,
    value_of_adaptive_design,
    value_of_experimentation,
)
from conftest import small_config


def finished_experiment(**overrides) -> Experiment:
    exp = Experiment(ExperimentConfig.from_dict(small_config(**overrides)))
    exp.start()
    while exp.loop_eligible():
        exp.run_batch()
    return exp


class TestValueOfExperimentation:
    def test_two_combo_hand_arithmetic(self):
        assert value_of_experimentation(np.array([0.04, 0.02])) == pytest.approx(
            4 / 3, abs=1e-12
        )

    def test_equal_ctrs_give_one(self):
        assert value_of_experimentation(np.full((2, 3), 0.037)) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_max_over_mean_exactly(self):
        rng = np.random.default_rng(1)
        ctrs = rng.uniform(0.01, 0.05, size=(3, 2))
        value = value_of_experimentation(ctrs)
        assert value == pytest.approx(ctrs.max() / ctrs.mean(), abs=1e-12)

    def test_case_study_magnitude(self):
        # six combination CTRs, best 3.94%, worst 2.0%, middles chosen so the
        # best-to-average ratio lands near 1.4
        ctrs = np.array([[0.020, 0.024], [0.0265, 0.028], [0.031, 0.0394]])
        assert value_of_experimentation(ctrs) == pytest.approx(1.4, abs=0.05)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateReport):
            value_of_experimentation(np.array([]))
        with pytest.raises(DegenerateReport):
            value_of_experimentation(np.zeros(4))


class TestValueOfAdaptiveDesign:
    def test_hand_arithmetic(self):
        # 300 impressions in one context, 3 creatives, theta-hat (0.10, 0.01, 0.01):
        # counterfactual = 100 * 0.12 = 12; observed 25 clicks gives 25/12
        impressions = np.array([[260], [20], [20]])
        clicks = np.array([[25], [0], [0]])
        theta_hat = np.array([[0.10], [0.01], [0.01]])
        value = value_of_adaptive_design(impressions, clicks, theta_hat)
        assert value == pytest.approx(25 / 12, abs=1e-12)
        assert counterfactual_equal_split(impressions, theta_hat) == pytest.approx(
            12.0, abs=1e-12
        )

    def test_single_creative_rejected(self):
        with pytest.raises(SingleCreative):
            value_of_adaptive_design(
                np.array([[100]]), np.array([[4]]), np.array([[0.04]])
            )

    def test_uniform_allocation_is_near_one(self):
        rng = np.random.default_rng(2)
        theta = np.array([[0.03, 0.05], [0.04, 0.02]])
        impressions = np.full((2, 2), 50_000)
        clicks = rng.binomial(impressions, theta)
        theta_hat = (1 + clicks) / (2 + impressions)
        value = value_of_adaptive_design(impressions, clicks, theta_hat)
        assert value == pytest.approx(1.0, abs=0.02)

    def test_adaptive_run_beats_equal_split(self):
        exp = finished_experiment(seed=101, batch_size=2000, max_batches=60)
        report = build_report(exp, draws=1000)
        assert report["value_of_adaptive_design"] > 1.0


class TestBuildReport:
    def test_same_seed_same_report(self):
        exp = finished_experiment(seed=31)
        a = json.dumps(build_report(exp, draws=2000, report_seed=5), sort_keys=True)
        b = json.dumps(build_report(exp, draws=2000, report_seed=5), sort_keys=True)
        assert a == b

    def test_different_report_seed_changes_mc_fields_only(self):
        exp = finished_experiment(seed=31)
        a = build_report(exp, draws=2000, report_seed=1)
        b = build_report(exp, draws=2000, report_seed=2)
        assert a["totals"] == b["totals"]
        for cell_a, cell_b in zip(a["cells"], b["cells"]):
            assert cell_a["alpha"] == cell_b["alpha"]
            assert cell_a["ctr_mean"] == cell_b["ctr_mean"]
        assert a["metadata"]["report_seed"] != b["metadata"]["report_seed"]

    def test_report_does_not_touch_traffic_streams(self):
        exp = finished_experiment(seed=41)
        before = exp.snapshot()
        build_report(exp, draws=2000)
        assert exp.snapshot() == before

    def test_envelope_and_grid_shape(self):
        exp = finished_experiment(seed=51)
        report = build_report(exp, draws=1000)
        assert report["experiment_id"] == exp.experiment_id
        assert report["kind"] == "creative-experiment"
        assert len(report["cells"]) == 9
        assert len(report["combinations"]) == 6
        assert {c["creative"] for c in report["combinations"]} == {1, 2, 3}
        assert {c["ta_id"] for c in report["combinations"]} == {1, 2}

    def test_marginals_are_phi_margins_and_sum_to_one(self):
        exp = finished_experiment(seed=51)
        report = build_report(exp, draws=2000)
        phi = np.array(
            [c["best_prob"] for c in report["combinations"]]
        ).reshape(3, 2)
        np.testing.assert_allclose(report["creative_marginals"], phi.sum(axis=1))
        np.testing.assert_allclose(report["ta_marginals"], phi.sum(axis=0))
        assert sum(report["creative_marginals"]) == pytest.approx(1.0, abs=1e-12)
        assert "marginals" in report["metadata"]["marginals_note"]

    def test_impression_shares_sum_to_one(self):
        exp = finished_experiment(seed=61)
        report = build_report(exp, draws=1000)
        assert sum(c["impression_share"] for c in report["combinations"]) == (
            pytest.approx(1.0, abs=1e-12)
        )

    def test_value_metrics_absent_mid_run(self):
        exp = Experiment(ExperimentConfig.from_dict(small_config(seed=71)))
        exp.start()
        exp.run_batch()
        report = build_report(exp, draws=1000)
        assert report["status"] == "running"
        assert report["value_of_experimentation"] is None
        assert report["value_of_adaptive_design"] is None

    def test_mid_run_report_reflects_current_posterior(self):
        exp = Experiment(ExperimentConfig.from_dict(small_config(seed=71)))
        exp.start()
        exp.run_batch()
        report = build_report(exp, draws=1000)
        assert report["t"] == 2
        total = sum(cell["impressions"] for cell in report["cells"])
        assert total == exp.cum_impressions.sum()

    def test_ci_bounds_ordered_and_contain_mean(self):
        exp = finished_experiment(seed=81)
        report = build_report(exp, draws=2000)
        for cell in report["cells"]:
            lo, hi = cell["ctr_ci"]
            assert lo <= cell["ctr_mean"] <= hi
        for combo in report["combinations"]:
            lo, hi = combo["ctr_ci"]
            assert lo < hi

    def test_draft_report_works(self):
        exp = Experiment(ExperimentConfig.from_dict(small_config()))
        report = build_report(exp, draws=1000)
        assert report["status"] == "draft"
        assert report["totals"]["impressions"] == 0


class TestHistory:
    def test_all_batches_kept_under_cap(self):
        exp = Experiment(ExperimentConfig.from_dict(small_config(seed=91, threshold=0.9999, max_batches=15)))
        exp.start()
        for _ in range(15):
            if not exp.loop_eligible():
                break
            exp.run_batch()
        payload = history_payload(exp)
        assert payload["batches"] == exp.batches_run
        assert [p["t"] for p in payload["points"]] == list(
            range(1, exp.batches_run + 1)
        )
        assert len(payload["points"][0]["best_prob"]) == 3

    def test_decimation_beyond_cap(self):
        exp = Experiment(ExperimentConfig.from_dict(small_config()))
        exp.phi_history = [np.full((3, 2), i / 5000.0) for i in range(2500)]
        payload = history_payload(exp, cap=1000)
        assert len(payload["points"]) <= 1001
        assert payload["points"][0]["t"] == 1
        assert payload["points"][-1]["t"] == 2500
        ts = [p["t"] for p in payload["points"]]
        assert ts == sorted(ts)
