"""Report assembly and the two experiment-level value metrics.

A report is a pure function of the posterior snapshot, the cumulative
counters, and a report seed. All Monte Carlo quantities in a report
(best-combination probabilities, audience-level credible intervals,
allocation weights) come from one joint draw of the posterior using an
independent generator, so rebuilding a report never perturbs the traffic
streams and two calls with the same seed agree bit for bit.

Every statistic a consumer might plot is computed here server-side;
clients are expected to render values verbatim.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import stats

from . import bandit, rng as rngmod
from .engine import COMPLETED, STOPPED, Experiment
from .errors import DegenerateReport, SingleCreative

_CHUNK = 8_192


def value_of_experimentation(combo_ctr: np.ndarray) -> float:
    """Best-to-average CTR ratio over all creative/audience combinations.

    The ratio says how much better the single best combination is than the
    naive strategy of spreading traffic evenly over every combination.
    """
    combo_ctr = np.asarray(combo_ctr, dtype=float)
    if combo_ctr.size == 0:
        raise DegenerateReport("no combinations to compare")
    mean = float(combo_ctr.mean())
    if not np.isfinite(combo_ctr).all() or mean <= 0.0:
        raise DegenerateReport("combination CTR estimates are degenerate")
    return float(combo_ctr.max()) / mean


def value_of_adaptive_design(
    impressions: np.ndarray, clicks: np.ndarray, theta_hat: np.ndarray
) -> float:
    """Observed clicks over the counterfactual clicks of a non-adaptive
    equal split of the same context-wise traffic.

    The counterfactual gives each creative impressions_j / R impressions in
    context j and scores them with the posterior mean CTRs, so it uses the
    same arrivals the experiment actually saw.
    """
    impressions = np.asarray(impressions, dtype=float)
    clicks = np.asarray(clicks, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    R = impressions.shape[0]
    if R < 2:
        raise SingleCreative("adaptive value is undefined for one creative")
    observed = clicks.sum()
    counterfactual = float(((impressions.sum(axis=0) / R) * theta_hat.sum(axis=0)).sum())
    if counterfactual <= 0.0:
        raise DegenerateReport("counterfactual clicks are zero")
    return float(observed) / counterfactual


def counterfactual_equal_split(impressions: np.ndarray, theta_hat: np.ndarray) -> float:
    """Expected clicks if each context's traffic were split evenly."""
    impressions = np.asarray(impressions, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    R = impressions.shape[0]
    return float(((impressions.sum(axis=0) / R) * theta_hat.sum(axis=0)).sum())


def build_report(
    exp: Experiment,
    level: float = 0.95,
    draws: Optional[int] = None,
    report_seed: int = 0,
) -> dict:
    cfg = exp.config
    R, J, K = cfg.R, cfg.J, cfg.K
    grid = exp.grid
    payoff = exp.payoff
    probs = exp.probs
    H = int(draws) if draws is not None else cfg.mc_draws
    rng = rngmod.report_generator(report_seed)

    W = probs.weight_matrix()
    ta_cost = payoff.ta_display_cost(probs)

    # one joint posterior draw feeds every Monte Carlo statistic
    lam_draws = np.empty((H, R, K))
    cell_win = np.zeros((R, J), dtype=np.int64)
    combo_win = np.zeros(R * K, dtype=np.int64)
    done = 0
    while done < H:
        m = min(_CHUNK, H - done)
        theta = rng.beta(grid.alpha, grid.beta, size=(m, R, J))
        lam = theta @ W
        lam_draws[done : done + m] = lam
        omega = cfg.gamma * lam - ta_cost
        combo_win += np.bincount(
            np.argmax(omega.reshape(m, R * K), axis=1), minlength=R * K
        )
        cell_payoff = cfg.gamma * theta - payoff.display_cost
        winners = np.argmax(cell_payoff, axis=1)
        cell_win += _count_winners(winners, R, J)
        done += m
    phi = combo_win.reshape(R, K) / H
    alloc = cell_win / H

    lo_q, hi_q = (1.0 - level) / 2.0, 1.0 - (1.0 - level) / 2.0
    lam_mean = bandit.aggregate_ta_ctr(grid.mean(), probs)
    lam_lo = np.quantile(lam_draws, lo_q, axis=0)
    lam_hi = np.quantile(lam_draws, hi_q, axis=0)

    cell_lo = stats.beta.ppf(lo_q, grid.alpha, grid.beta)
    cell_hi = stats.beta.ppf(hi_q, grid.alpha, grid.beta)
    cell_mean = grid.mean()

    membership = np.zeros((J, K), dtype=np.int64)
    for k, members in probs.overlap.items():
        membership[[j - 1 for j in members], k - 1] = 1
    combo_impressions = exp.cum_impressions @ membership
    combo_clicks = exp.cum_clicks @ membership
    total_combo_impressions = combo_impressions.sum()

    cells = []
    for r in range(R):
        for j in range(J):
            cells.append(
                {
                    "creative": r + 1,
                    "da_id": j + 1,
                    "alpha": float(grid.alpha[r, j]),
                    "beta": float(grid.beta[r, j]),
                    "ctr_mean": float(cell_mean[r, j]),
                    "ctr_ci": [float(cell_lo[r, j]), float(cell_hi[r, j])],
                    "impressions": int(exp.cum_impressions[r, j]),
                    "clicks": int(exp.cum_clicks[r, j]),
                    "cost": float(exp.cum_cost[r, j]),
                    "allocation_weight": float(alloc[r, j]),
                }
            )

    combinations = []
    for r in range(R):
        for k in range(K):
            share = (
                float(combo_impressions[r, k]) / float(total_combo_impressions)
                if total_combo_impressions > 0
                else 0.0
            )
            combinations.append(
                {
                    "creative": r + 1,
                    "ta_id": k + 1,
                    "ctr_mean": float(lam_mean[r, k]),
                    "ctr_ci": [float(lam_lo[r, k]), float(lam_hi[r, k])],
                    "best_prob": float(phi[r, k]),
                    "impressions": int(combo_impressions[r, k]),
                    "clicks": int(combo_clicks[r, k]),
                    "impression_share": share,
                }
            )

    flat_best = int(np.argmax(phi))
    best_r, best_k = divmod(flat_best, K)
    final = exp.status in (COMPLETED, STOPPED)

    voe = None
    voad = None
    if final:
        try:
            voe = value_of_experimentation(lam_mean)
        except DegenerateReport:
            voe = None
        try:
            voad = value_of_adaptive_design(
                exp.cum_impressions, exp.cum_clicks, cell_mean
            )
        except (SingleCreative, DegenerateReport):
            voad = None

    return {
        "experiment_id": exp.experiment_id,
        "status": exp.status,
        "t": grid.t,
        "batches_run": exp.batches_run,
        "kind": cfg.kind,
        "threshold": cfg.threshold,
        "threshold_crossed": exp.threshold_crossed,
        "continuing": exp.continuing,
        "stop_reason": exp.stop_reason,
        "best": {
            "creative": best_r + 1,
            "ta_id": best_k + 1,
            "best_prob": float(phi[best_r, best_k]),
        },
        "cells": cells,
        "combinations": combinations,
        "creative_marginals": phi.sum(axis=1).tolist(),
        "ta_marginals": phi.sum(axis=0).tolist(),
        "totals": {
            "impressions": int(exp.cum_impressions.sum()),
            "clicks": int(exp.cum_clicks.sum()),
            "cost": float(exp.cum_cost.sum()),
        },
        "value_of_experimentation": voe,
        "value_of_adaptive_design": voad,
        "posterior": bandit.serialize_posterior(grid, exp.experiment_id, cfg.gamma),
        "metadata": {
            "draws": H,
            "report_seed": report_seed,
            "ci_level": level,
            "marginals_note": (
                "creative_marginals[r] and ta_marginals[k] are row and column "
                "sums of best_prob; each set sums to 1 across the grid"
            ),
        },
    }


def _count_winners(winners: np.ndarray, R: int, J: int) -> np.ndarray:
    """Per-context winner counts from an (m, J) argmax matrix."""
    counts = np.zeros((R, J), dtype=np.int64)
    for j in range(J):
        counts[:, j] += np.bincount(winners[:, j], minlength=R)
    return counts


def history_payload(exp: Experiment, cap: int = 1000) -> dict:
    """Per-batch best-probability trajectory, decimated to at most cap
    points; the final batch is always included."""
    total = len(exp.phi_history)
    if total <= cap:
        indices = range(total)
    else:
        stride = -(-total // cap)
        kept = list(range(0, total, stride))
        if kept[-1] != total - 1:
            kept.append(total - 1)
        indices = kept
    points = [
        {"t": i + 1, "best_prob": exp.phi_history[i].tolist()} for i in indices
    ]
    return {
        "experiment_id": exp.experiment_id,
        "status": exp.status,
        "t": exp.grid.t,
        "batches": total,
        "points": points,
    }
