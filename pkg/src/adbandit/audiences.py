"""Target audiences, disjoint sub-populations, and context probabilities.

Advertiser-defined target audiences (TAs) are predicates over user features
and may overlap. Learning happens instead on disjoint audiences (DAs): the
sub-populations carved out by exact TA-membership patterns. A DA is named by
its signature, the set of TAs it belongs to, and every nonempty signature
gets a DA up front so the partition never depends on the population.

Canonical DA order: signatures interpreted as bitmasks (bit ``k-1`` set when
TA ``k`` is in the signature), ascending. ``da_id`` is the 1-based position
in that order, so for K=2: DA 1 = {1}, DA 2 = {2}, DA 3 = {1, 2}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DuplicateId,
    EmptyInput,
    EmptyTargetAudience,
    MissingFeature,
)

UserFeatures = Mapping[str, object]

MAX_TARGET_AUDIENCES = 5

PROB_CLOSURE_TOL = 1e-9


@dataclass(frozen=True)
class Clause:
    """One conjunct of a TA predicate.

    Either a set-membership test (``values`` is not None) or an inclusive
    interval test on a numeric feature. A range clause evaluates to False on
    non-numeric values so predicates stay total.
    """

    feature: str
    values: Optional[frozenset] = None
    lo: Optional[float] = None
    hi: Optional[float] = None

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Clause":
        if "feature" not in raw:
            raise ConfigError("predicate clause missing 'feature'")
        feature = str(raw["feature"])
        if "in" in raw:
            vals = raw["in"]
            if not isinstance(vals, (list, tuple)) or len(vals) == 0:
                raise ConfigError(f"clause on {feature!r}: 'in' must be a nonempty list")
            return cls(feature=feature, values=frozenset(vals))
        if "range" in raw:
            rng = raw["range"]
            if not isinstance(rng, (list, tuple)) or len(rng) != 2:
                raise ConfigError(f"clause on {feature!r}: 'range' must be [lo, hi]")
            lo, hi = float(rng[0]), float(rng[1])
            if lo > hi:
                raise ConfigError(f"clause on {feature!r}: range lo > hi")
            return cls(feature=feature, lo=lo, hi=hi)
        raise ConfigError(f"clause on {feature!r}: needs 'in' or 'range'")

    def to_dict(self) -> dict:
        if self.values is not None:
            return {"feature": self.feature, "in": sorted(self.values, key=repr)}
        return {"feature": self.feature, "range": [self.lo, self.hi]}

    def matches(self, user: UserFeatures) -> bool:
        if self.feature not in user:
            raise MissingFeature(self.feature)
        value = user[self.feature]
        if self.values is not None:
            return value in self.values
        if not isinstance(value, (int, float, np.integer, np.floating)) or isinstance(value, bool):
            return False
        return self.lo <= value <= self.hi

    def matches_column(self, column: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over one feature column."""
        if self.values is not None:
            return np.isin(column, list(self.values))
        if not np.issubdtype(column.dtype, np.number):
            return np.zeros(column.shape, dtype=bool)
        return (column >= self.lo) & (column <= self.hi)


@dataclass(frozen=True)
class TargetAudienceDef:
    """A named TA: the conjunction of its clauses."""

    ta_id: int
    name: str
    clauses: tuple[Clause, ...]

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TargetAudienceDef":
        try:
            ta_id = int(raw["ta_id"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("target audience missing integer 'ta_id'")
        clauses = raw.get("predicate", [])
        if not isinstance(clauses, (list, tuple)) or len(clauses) == 0:
            raise ConfigError(f"TA {ta_id}: 'predicate' must be a nonempty clause list")
        return cls(
            ta_id=ta_id,
            name=str(raw.get("name", f"TA{ta_id}")),
            clauses=tuple(Clause.from_dict(c) for c in clauses),
        )

    def to_dict(self) -> dict:
        return {
            "ta_id": self.ta_id,
            "name": self.name,
            "predicate": [c.to_dict() for c in self.clauses],
        }

    def matches(self, user: UserFeatures) -> bool:
        return all(c.matches(user) for c in self.clauses)

    def matches_bulk(self, features: Mapping[str, np.ndarray]) -> np.ndarray:
        masks = []
        for clause in self.clauses:
            if clause.feature not in features:
                raise MissingFeature(clause.feature)
            masks.append(clause.matches_column(np.asarray(features[clause.feature])))
        out = masks[0]
        for m in masks[1:]:
            out = out & m
        return out


@dataclass(frozen=True)
class DisjointAudience:
    da_id: int
    signature: frozenset[int]

    @property
    def bitmask(self) -> int:
        return sum(1 << (k - 1) for k in self.signature)

    def to_dict(self) -> dict:
        return {"da_id": self.da_id, "signature": sorted(self.signature)}


def partition(tas: Sequence[TargetAudienceDef]) -> list[DisjointAudience]:
    """Enumerate all nonempty TA-membership signatures in canonical order.

    Signatures that happen to be empty in the population simply receive no
    traffic; enumerating them up front keeps the partition independent of
    any population sample.
    """
    if len(tas) == 0:
        raise EmptyInput("need at least one target audience")
    if len(tas) > MAX_TARGET_AUDIENCES:
        raise ConfigError(f"at most {MAX_TARGET_AUDIENCES} target audiences, got {len(tas)}")
    ids = [ta.ta_id for ta in tas]
    if len(set(ids)) != len(ids):
        raise DuplicateId(f"duplicate ta_id in {ids}")
    if sorted(ids) != list(range(1, len(tas) + 1)):
        raise ConfigError(f"ta_ids must be 1..{len(tas)}, got {sorted(ids)}")
    k = len(tas)
    das = []
    for mask in range(1, 2**k):
        sig = frozenset(i + 1 for i in range(k) if mask & (1 << i))
        das.append(DisjointAudience(da_id=len(das) + 1, signature=sig))
    return das


def _signature_index(das: Sequence[DisjointAudience]) -> dict[frozenset, int]:
    return {da.signature: da.da_id for da in das}


def assign_context(
    user: UserFeatures,
    tas: Sequence[TargetAudienceDef],
    das: Sequence[DisjointAudience],
) -> Optional[int]:
    """Map a user to the da_id matching their exact TA-membership set.

    Returns None when the user satisfies no TA (outside the experiment).
    """
    satisfied = frozenset(ta.ta_id for ta in tas if ta.matches(user))
    if not satisfied:
        return None
    return _signature_index(das)[satisfied]


def assign_contexts_bulk(
    features: Mapping[str, np.ndarray],
    tas: Sequence[TargetAudienceDef],
    das: Sequence[DisjointAudience],
) -> np.ndarray:
    """Vectorized assignment: da_id per user, 0 where no TA matches.

    ``features`` maps feature name to a column over the same user axis.
    """
    n = len(next(iter(features.values())))
    bitmask = np.zeros(n, dtype=np.int64)
    for ta in tas:
        bitmask |= ta.matches_bulk(features).astype(np.int64) << (ta.ta_id - 1)
    lookup = np.zeros(2 ** len(tas), dtype=np.int64)
    for da in das:
        lookup[da.bitmask] = da.da_id
    return lookup[bitmask]


@dataclass(frozen=True)
class ContextProbabilities:
    """P(context j | user drawn from TA k), zero wherever DA j is outside TA k.

    ``p_hat`` is (J, K); row j, column k. The overlap map O(k) is implied by
    the signatures and stored explicitly for convenience.
    """

    p_hat: np.ndarray
    overlap: dict[int, tuple[int, ...]] = field(repr=False)

    @property
    def J(self) -> int:
        return self.p_hat.shape[0]

    @property
    def K(self) -> int:
        return self.p_hat.shape[1]

    def weight_matrix(self) -> np.ndarray:
        """(J, K) aggregation weights; identical to p_hat by construction."""
        return self.p_hat

    def validate(self) -> None:
        for k in range(1, self.K + 1):
            inside = np.zeros(self.J, dtype=bool)
            inside[[j - 1 for j in self.overlap[k]]] = True
            if np.any(self.p_hat[~inside, k - 1] != 0.0):
                raise ConfigError(f"p_hat nonzero outside O({k})")
            total = float(self.p_hat[inside, k - 1].sum())
            if abs(total - 1.0) > PROB_CLOSURE_TOL:
                raise ConfigError(f"p_hat(.|{k}) sums to {total}, expected 1")

    def to_table(self) -> list[list[float]]:
        return self.p_hat.tolist()


def overlap_map(das: Sequence[DisjointAudience], num_tas: int) -> dict[int, tuple[int, ...]]:
    """O(k): da_ids whose DA lies inside TA k."""
    return {
        k: tuple(da.da_id for da in das if k in da.signature)
        for k in range(1, num_tas + 1)
    }


def context_probs_from_table(
    table: Sequence[Sequence[float]],
    das: Sequence[DisjointAudience],
    num_tas: int,
) -> ContextProbabilities:
    p_hat = np.asarray(table, dtype=float)
    if p_hat.shape != (len(das), num_tas):
        raise ConfigError(
            f"context-probability table must be {len(das)}x{num_tas}, got {p_hat.shape}"
        )
    probs = ContextProbabilities(p_hat=p_hat, overlap=overlap_map(das, num_tas))
    probs.validate()
    return probs


def estimate_context_probs(
    population_sample: Sequence[UserFeatures],
    tas: Sequence[TargetAudienceDef],
    das: Sequence[DisjointAudience],
) -> ContextProbabilities:
    """Bin estimator over a reference sample: share of TA(k)'s users in DA j.

    Users matching no TA count toward the sample but not toward any
    conditional. A TA with zero sampled users has undefined conditionals.
    """
    if len(population_sample) == 0:
        raise EmptyInput("population sample is empty")
    J, K = len(das), len(tas)
    da_counts = np.zeros(J, dtype=np.int64)
    for user in population_sample:
        da_id = assign_context(user, tas, das)
        if da_id is not None:
            da_counts[da_id - 1] += 1
    overlap = overlap_map(das, K)
    p_hat = np.zeros((J, K), dtype=float)
    for k in range(1, K + 1):
        members = [j - 1 for j in overlap[k]]
        ta_count = int(da_counts[members].sum())
        if ta_count == 0:
            ta = next(t for t in tas if t.ta_id == k)
            raise EmptyTargetAudience(f"TA {k} ({ta.name!r}) matched no sampled user")
        p_hat[members, k - 1] = da_counts[members] / ta_count
    probs = ContextProbabilities(p_hat=p_hat, overlap=overlap)
    probs.validate()
    return probs
