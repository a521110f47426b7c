"""Synthetic traffic: arrivals, click outcomes, display costs, log records.

Stands in for the ad-serving path. Arrivals are i.i.d. draws over the
disjoint contexts (plus an out-of-experiment bucket); clicks are Bernoulli
in the cell's true CTR; display costs are fixed or drawn from a symmetric
clipped-at-zero distribution around a per-cell mean.

Indexing matches the bandit module: 0-based (r, j) everywhere, with -1 as
the no-context sentinel in arrival arrays. Log records carry the 1-based
domain-facing ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

WEIGHT_CLOSURE_TOL = 1e-9

NO_CONTEXT = -1


@dataclass(frozen=True)
class CostSpec:
    """Per-impression display cost: fixed per cell, or mean +- spread."""

    fixed: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None
    spread: Optional[np.ndarray] = None

    @classmethod
    def zero(cls, R: int, J: int) -> "CostSpec":
        return cls(fixed=np.zeros((R, J)))

    @classmethod
    def from_config(cls, raw, R: int, J: int) -> "CostSpec":
        if raw is None:
            return cls.zero(R, J)
        if isinstance(raw, (int, float)):
            if raw < 0:
                raise ConfigError("fixed costs must be nonnegative")
            return cls(fixed=np.full((R, J), float(raw)))
        if isinstance(raw, dict):
            if "mean" not in raw or "spread" not in raw:
                raise ConfigError("stochastic cost needs 'mean' and 'spread'")
            mean = _as_cell_matrix(raw["mean"], R, J, "cost mean")
            spread = _as_cell_matrix(raw["spread"], R, J, "cost spread")
            if np.any(mean < 0) or np.any(spread < 0):
                raise ConfigError("cost mean and spread must be nonnegative")
            return cls(mean=mean, spread=spread)
        fixed = _as_cell_matrix(raw, R, J, "cost")
        if np.any(fixed < 0):
            raise ConfigError("fixed costs must be nonnegative")
        return cls(fixed=fixed)

    @property
    def stochastic(self) -> bool:
        return self.fixed is None

    def mean_cost(self) -> np.ndarray:
        return self.mean.copy() if self.stochastic else self.fixed.copy()

    def to_config(self):
        if self.stochastic:
            return {"mean": self.mean.tolist(), "spread": self.spread.tolist()}
        return self.fixed.tolist()


def _as_cell_matrix(raw, R: int, J: int, what: str) -> np.ndarray:
    if isinstance(raw, (int, float)):
        return np.full((R, J), float(raw))
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (R, J):
        raise ConfigError(f"{what} must be scalar or {R}x{J}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GroundTruth:
    """True CTR per cell, cost spec, and the arrival law over contexts."""

    true_ctr: np.ndarray
    cost: CostSpec
    context_weights: np.ndarray
    no_context_weight: float = 0.0

    @property
    def R(self) -> int:
        return self.true_ctr.shape[0]

    @property
    def J(self) -> int:
        return self.true_ctr.shape[1]

    def validate(self) -> None:
        if np.any(self.true_ctr < 0) or np.any(self.true_ctr > 1):
            raise ConfigError("true CTRs must lie in [0, 1]")
        if self.context_weights.shape != (self.J,):
            raise ConfigError("context weights must have one entry per context")
        if np.any(self.context_weights < 0) or self.no_context_weight < 0:
            raise ConfigError("arrival weights must be nonnegative")
        total = float(self.context_weights.sum()) + self.no_context_weight
        if abs(total - 1.0) > WEIGHT_CLOSURE_TOL:
            raise ConfigError(f"arrival weights sum to {total}, expected 1")


def sample_batch(gt: GroundTruth, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Contexts of one batch of arrivals: j in 0..J-1, or -1 for no context.

    The array index is the user ordinal within the batch.
    """
    if batch_size < 0:
        raise ConfigError("batch size must be nonnegative")
    if batch_size == 0:
        return np.zeros(0, dtype=np.int64)
    values = np.concatenate([np.arange(gt.J), [NO_CONTEXT]])
    p = np.concatenate([gt.context_weights, [gt.no_context_weight]])
    return rng.choice(values, size=batch_size, p=p / p.sum())


def realize_outcome(
    gt: GroundTruth, j: int, r: int, rng: np.random.Generator
) -> tuple[bool, float]:
    """Click and display cost for one impression of creative r in context j."""
    clicked = bool(rng.random() < gt.true_ctr[r, j])
    if gt.cost.stochastic:
        u = rng.random()
        cost = max(0.0, gt.cost.mean[r, j] + (2.0 * u - 1.0) * gt.cost.spread[r, j])
    else:
        cost = float(gt.cost.fixed[r, j])
    return clicked, cost


def realize_outcomes_batch(
    gt: GroundTruth,
    contexts: np.ndarray,
    chosen: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized outcomes; consumes the stream exactly like per-user calls.

    With stochastic costs each user draws (click, cost) adjacently, which is
    the same interleaving as :func:`realize_outcome` in a loop.
    """
    n = contexts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool), np.zeros(0)
    theta = gt.true_ctr[chosen, contexts]
    if gt.cost.stochastic:
        u = rng.random((n, 2))
        clicked = u[:, 0] < theta
        mean = gt.cost.mean[chosen, contexts]
        spread = gt.cost.spread[chosen, contexts]
        costs = np.maximum(0.0, mean + (2.0 * u[:, 1] - 1.0) * spread)
    else:
        clicked = rng.random(n) < theta
        costs = gt.cost.fixed[chosen, contexts].astype(float)
    return clicked, costs


@dataclass(frozen=True)
class LogRecord:
    """One served impression; the unit of the append-only log stream."""

    t: int
    i: int
    da_id: int
    creative: int
    clicked: int
    cost: float

    FIELDS = ("t", "i", "da_id", "creative", "clicked", "cost")

    def to_line(self) -> str:
        return f"{self.t},{self.i},{self.da_id},{self.creative},{self.clicked},{self.cost!r}"

    @classmethod
    def from_line(cls, line: str) -> "LogRecord":
        t, i, da_id, creative, clicked, cost = line.rstrip("\n").split(",")
        return cls(
            t=int(t),
            i=int(i),
            da_id=int(da_id),
            creative=int(creative),
            clicked=int(clicked),
            cost=float(cost),
        )


def format_log(records: Sequence[LogRecord]) -> str:
    """Newline-delimited log stream in declared field order."""
    return "".join(rec.to_line() + "\n" for rec in records)


@dataclass(frozen=True)
class FeatureSpec:
    """Generator for one synthetic user feature."""

    feature: str
    kind: str
    values: tuple = ()
    probs: Optional[tuple] = None
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def from_dict(cls, raw: dict) -> "FeatureSpec":
        kind = raw.get("kind")
        if kind == "categorical":
            values = tuple(raw["values"])
            probs = tuple(raw["probs"]) if "probs" in raw else None
            return cls(feature=raw["feature"], kind=kind, values=values, probs=probs)
        if kind in ("uniform", "uniform_int"):
            return cls(feature=raw["feature"], kind=kind, lo=float(raw["lo"]), hi=float(raw["hi"]))
        raise ConfigError(f"unknown feature kind {kind!r}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "categorical":
            return rng.choice(np.array(self.values, dtype=object), size=n, p=self.probs)
        if self.kind == "uniform_int":
            return rng.integers(int(self.lo), int(self.hi) + 1, size=n)
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class FeaturePopulation:
    """Feature-level population used to exercise the audience algebra end to
    end: raw features are generated here, contexts come from assignment."""

    specs: tuple[FeatureSpec, ...]

    @classmethod
    def from_config(cls, raw: Sequence[dict]) -> "FeaturePopulation":
        return cls(specs=tuple(FeatureSpec.from_dict(s) for s in raw))

    def sample_columns(self, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {spec.feature: spec.sample(n, rng) for spec in self.specs}

    def sample_users(self, n: int, rng: np.random.Generator) -> list[dict]:
        cols = self.sample_columns(n, rng)
        names = list(cols)
        return [{name: cols[name][i].item() if hasattr(cols[name][i], "item") else cols[name][i] for name in names} for i in range(n)]
