"""Beta-Bernoulli posterior grid and Thompson-sampling decisions.

The grid holds one Beta(alpha, beta) posterior per (creative r, context j)
cell, flat Beta(1, 1) priors to start. Creatives are allocated by sampling
one CTR per arm from the frozen per-batch posterior and acting greedily on
expected payoff (value-per-click times sampled CTR, minus mean display
cost); batch outcomes then fold into the conjugate update.

Progress toward the decision goal lives at the target-audience level:
per-context CTR draws aggregate into TA-level CTRs with fixed context
weights, and the probability each creative-TA combination is best is
estimated by Monte Carlo over joint posterior draws.

Indexing convention: everything in this module is 0-based numpy indexing
(r in 0..R-1, j in 0..J-1). Domain-facing ids (creative names, 1-based
da_id) are translated at the engine boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .audiences import ContextProbabilities
from .errors import ConfigError, MalformedStats, TooManyArms

DEFAULT_CELL_CAP = 25

DEFAULT_MC_DRAWS = 10_000

_MC_CHUNK = 32_768


@dataclass(frozen=True)
class PosteriorGrid:
    """(R, J) Beta posteriors plus the batch counter t (t=1 before any data)."""

    alpha: np.ndarray
    beta: np.ndarray
    t: int

    @property
    def R(self) -> int:
        return self.alpha.shape[0]

    @property
    def J(self) -> int:
        return self.alpha.shape[1]

    def mean(self) -> np.ndarray:
        """Posterior mean CTR per cell."""
        return self.alpha / (self.alpha + self.beta)

    def observations(self) -> np.ndarray:
        """Impressions folded into each cell so far (prior carries none)."""
        return self.alpha + self.beta - 2.0


@dataclass(frozen=True)
class PayoffModel:
    """Converts CTRs to expected monetary payoff per impression.

    ``gamma`` is the value of a click; ``display_cost`` is the mean cost of
    showing creative r to context j, shape (R, J). Defaults reduce payoff
    to pure CTR, which is the reported metric.
    """

    gamma: float
    display_cost: np.ndarray

    @classmethod
    def ctr_only(cls, R: int, J: int, gamma: float = 1.0) -> "PayoffModel":
        return cls(gamma=float(gamma), display_cost=np.zeros((R, J)))

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if np.any(self.display_cost < 0):
            raise ConfigError("display costs must be nonnegative")

    def cell_payoff(self, theta: np.ndarray, j: np.ndarray | int) -> np.ndarray:
        """Expected payoff for per-cell CTR draws against contexts j."""
        return self.gamma * theta - self.display_cost[:, j].T

    def ta_display_cost(self, probs: ContextProbabilities) -> np.ndarray:
        """Mean display cost aggregated to TA level, shape (R, K)."""
        return self.display_cost @ probs.weight_matrix()


@dataclass(frozen=True)
class BatchStats:
    """Per-cell impression and click counts for one batch."""

    n: np.ndarray
    s: np.ndarray
    total_users: int

    def validate(self) -> None:
        if self.n.shape != self.s.shape:
            raise MalformedStats("impression and click matrices differ in shape")
        if np.any(self.n < 0) or np.any(self.s < 0):
            raise MalformedStats("negative counts")
        if np.any(self.s > self.n):
            raise MalformedStats("clicks exceed impressions in some cell")
        if int(self.n.sum()) > self.total_users:
            raise MalformedStats("cell impressions exceed batch size")


@dataclass(frozen=True)
class BestProbabilities:
    """Monte Carlo estimate of P[combination (r, k) has the best payoff].

    ``best_prob`` is (R, K) and sums to 1 (each draw elects exactly one
    winner). ``ta_ctr_mean`` is the exact posterior mean of the TA-level
    CTR, by linearity of the aggregation.
    """

    best_prob: np.ndarray
    draws: int
    ta_ctr_mean: np.ndarray


def init_priors(R: int, J: int, cell_cap: int | None = DEFAULT_CELL_CAP) -> PosteriorGrid:
    """Fresh grid of flat Beta(1, 1) priors.

    ``cell_cap`` bounds R*J; the engine lifts it after validating the
    creative-x-TA combination cap at config level, since the internal
    context grid is allowed to be finer than the decision-level arms.
    """
    if R < 1 or J < 1:
        raise ConfigError(f"need R >= 1 and J >= 1, got R={R}, J={J}")
    if cell_cap is not None and R * J > cell_cap:
        raise TooManyArms(f"{R}x{J} = {R * J} cells exceeds cap of {cell_cap}")
    return PosteriorGrid(alpha=np.ones((R, J)), beta=np.ones((R, J)), t=1)


def choose_creative(
    grid: PosteriorGrid,
    payoff: PayoffModel,
    j: int,
    rng: np.random.Generator,
) -> int:
    """One-draw Thompson selection for a single impression in context j.

    Sampling one CTR per creative and taking the payoff argmax realizes the
    posterior-probability-of-best allocation without computing it; ties go
    to the lowest index (measure zero under continuous posteriors).
    """
    theta = rng.beta(grid.alpha[:, j], grid.beta[:, j])
    return int(np.argmax(payoff.gamma * theta - payoff.display_cost[:, j]))


def choose_creatives_batch(
    grid: PosteriorGrid,
    payoff: PayoffModel,
    contexts: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized one-draw Thompson selection for a batch of contexts.

    Bit-identical to calling :func:`choose_creative` once per impression on
    the same stream: elementwise draws consume the bitstream in the same
    order either way.
    """
    contexts = np.asarray(contexts, dtype=np.int64)
    if contexts.size == 0:
        return np.zeros(0, dtype=np.int64)
    theta = rng.beta(grid.alpha[:, contexts].T, grid.beta[:, contexts].T)
    scores = payoff.gamma * theta - payoff.display_cost[:, contexts].T
    return np.argmax(scores, axis=1)


def allocation_weights(
    grid: PosteriorGrid,
    payoff: PayoffModel,
    j: int,
    draws: int = DEFAULT_MC_DRAWS,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Reporting-only estimate of the per-context allocation law.

    Fraction of joint posterior draws in which each creative attains the
    maximum expected payoff in context j. Not used on the serving path.
    """
    if draws < 1:
        raise ConfigError("draws must be >= 1")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    theta = rng.beta(grid.alpha[:, j], grid.beta[:, j], size=(draws, grid.R))
    scores = payoff.gamma * theta - payoff.display_cost[:, j]
    winners = np.argmax(scores, axis=1)
    return np.bincount(winners, minlength=grid.R) / draws


def update(grid: PosteriorGrid, batch: BatchStats) -> PosteriorGrid:
    """Conjugate update: clicks add to alpha, non-clicks to beta; t advances."""
    batch.validate()
    if batch.n.shape != grid.alpha.shape:
        raise MalformedStats(
            f"stats shape {batch.n.shape} does not match grid {grid.alpha.shape}"
        )
    return PosteriorGrid(
        alpha=grid.alpha + batch.s,
        beta=grid.beta + (batch.n - batch.s),
        t=grid.t + 1,
    )


def aggregate_ta_ctr(theta: np.ndarray, probs: ContextProbabilities) -> np.ndarray:
    """Aggregate per-context CTRs to TA level with the fixed context weights.

    Accepts (..., R, J) and returns (..., R, K); each TA's value is the
    context-probability-weighted average over the contexts inside it.
    """
    return np.asarray(theta) @ probs.weight_matrix()


def best_combo_probability(
    grid: PosteriorGrid,
    payoff: PayoffModel,
    probs: ContextProbabilities,
    draws: int = DEFAULT_MC_DRAWS,
    rng: np.random.Generator | None = None,
) -> BestProbabilities:
    """Monte Carlo best-combination probabilities over the current posterior.

    Each draw samples the whole grid, aggregates to TA-level CTRs, converts
    to payoffs, and credits the argmax combination (ties to the
    lexicographically smallest (r, k), which argmax on the r-major
    flattening provides).
    """
    if draws < 1:
        raise ConfigError("draws must be >= 1")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    R, K = grid.R, probs.K
    ta_cost = payoff.ta_display_cost(probs)
    counts = np.zeros(R * K, dtype=np.int64)
    remaining = draws
    while remaining > 0:
        chunk = min(remaining, _MC_CHUNK)
        theta = rng.beta(grid.alpha, grid.beta, size=(chunk, R, grid.J))
        omega = payoff.gamma * aggregate_ta_ctr(theta, probs) - ta_cost
        winners = np.argmax(omega.reshape(chunk, R * K), axis=1)
        counts += np.bincount(winners, minlength=R * K)
        remaining -= chunk
    return BestProbabilities(
        best_prob=(counts / draws).reshape(R, K),
        draws=draws,
        ta_ctr_mean=aggregate_ta_ctr(grid.mean(), probs),
    )


def credible_interval(alpha: float, beta: float, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed Beta credible interval for one cell."""
    if not 0 < level < 1:
        raise ConfigError(f"level must be in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    lo, hi = stats.beta.ppf([tail, 1.0 - tail], alpha, beta)
    return float(lo), float(hi)


def ta_credible_interval(
    grid: PosteriorGrid,
    probs: ContextProbabilities,
    r: int,
    k: int,
    level: float = 0.95,
    draws: int = DEFAULT_MC_DRAWS,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Equal-tailed interval for a TA-level CTR, from Monte Carlo draws.

    The TA-level CTR has no closed-form posterior (it is a weighted sum of
    independent Betas), so the interval is taken from empirical quantiles.
    """
    if not 0 < level < 1:
        raise ConfigError(f"level must be in (0, 1), got {level}")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    theta = rng.beta(grid.alpha[r], grid.beta[r], size=(draws, grid.J))
    lam = theta @ probs.weight_matrix()[:, k]
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(lam, [tail, 1.0 - tail])
    return float(lo), float(hi)


def serialize_posterior(grid: PosteriorGrid, experiment_id: str, gamma: float) -> dict:
    """Snapshot wire format: header plus one record per cell, r-major order."""
    return {
        "header": {
            "experiment_id": experiment_id,
            "t": grid.t,
            "R": grid.R,
            "J": grid.J,
            "gamma": gamma,
        },
        "cells": [
            {
                "r": r + 1,
                "j": j + 1,
                "alpha": float(grid.alpha[r, j]),
                "beta": float(grid.beta[r, j]),
            }
            for r in range(grid.R)
            for j in range(grid.J)
        ],
    }


def parse_posterior(payload: dict) -> tuple[PosteriorGrid, str, float]:
    header = payload["header"]
    R, J = int(header["R"]), int(header["J"])
    alpha = np.ones((R, J))
    beta = np.ones((R, J))
    for cell in payload["cells"]:
        alpha[cell["r"] - 1, cell["j"] - 1] = cell["alpha"]
        beta[cell["r"] - 1, cell["j"] - 1] = cell["beta"]
    grid = PosteriorGrid(alpha=alpha, beta=beta, t=int(header["t"]))
    return grid, str(header["experiment_id"]), float(header["gamma"])
