import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adbandit.audiences import (
    Clause,
    TargetAudienceDef,
    assign_context,
    assign_contexts_bulk,
    context_probs_from_table,
    estimate_context_probs,
    overlap_map,
    partition,
)
from adbandit.errors import (
    ConfigError,
    DuplicateId,
    EmptyInput,
    EmptyTargetAudience,
    MissingFeature,
)


def ta(ta_id, clauses, name=None):
    return TargetAudienceDef.from_dict(
        {"ta_id": ta_id, "name": name or f"ta{ta_id}", "predicate": clauses}
    )


YOUNG = ta(1, [{"feature": "age", "range": [18, 34]}], "young")
URBAN = ta(2, [{"feature": "region", "in": ["metro", "urban"]}], "urban")
RICH = ta(3, [{"feature": "income", "range": [100, 1000]}], "rich")


class TestClause:
    def test_set_membership(self):
        clause = Clause.from_dict({"feature": "region", "in": ["metro"]})
        assert clause.matches({"region": "metro"})
        assert not clause.matches({"region": "rural"})

    def test_range_is_inclusive(self):
        clause = Clause.from_dict({"feature": "age", "range": [18, 34]})
        assert clause.matches({"age": 18})
        assert clause.matches({"age": 34})
        assert not clause.matches({"age": 35})

    def test_range_rejects_non_numeric_values(self):
        clause = Clause.from_dict({"feature": "age", "range": [18, 34]})
        assert not clause.matches({"age": "old"})

    def test_missing_feature_is_an_error(self):
        clause = Clause.from_dict({"feature": "age", "range": [18, 34]})
        with pytest.raises(MissingFeature):
            clause.matches({"region": "metro"})

    @pytest.mark.parametrize(
        "raw",
        [
            {"in": ["x"]},
            {"feature": "f"},
            {"feature": "f", "in": []},
            {"feature": "f", "range": [3]},
            {"feature": "f", "range": [5, 1]},
        ],
    )
    def test_malformed_clauses_rejected(self, raw):
        with pytest.raises(ConfigError):
            Clause.from_dict(raw)

    def test_bulk_matches_scalar(self):
        clause = Clause.from_dict({"feature": "age", "range": [18, 34]})
        ages = np.array([17, 18, 30, 34, 35])
        expected = [clause.matches({"age": int(a)}) for a in ages]
        assert clause.matches_column(ages).tolist() == expected


class TestPartition:
    def test_two_overlapping_tas_make_three_das(self):
        das = partition([YOUNG, URBAN])
        assert [da.da_id for da in das] == [1, 2, 3]
        assert [da.signature for da in das] == [
            frozenset({1}),
            frozenset({2}),
            frozenset({1, 2}),
        ]

    def test_single_ta(self):
        das = partition([YOUNG])
        assert len(das) == 1
        assert das[0].signature == frozenset({1})

    def test_three_tas_enumerate_all_nonempty_subsets(self):
        das = partition([YOUNG, URBAN, RICH])
        signatures = {da.signature for da in das}
        expected = set()
        for mask in range(1, 8):
            expected.add(frozenset(k for k in (1, 2, 3) if mask & (1 << (k - 1))))
        assert signatures == expected
        # canonical order: bitmask ascending
        masks = [da.bitmask for da in das]
        assert masks == sorted(masks)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            partition([])

    def test_duplicate_ids(self):
        with pytest.raises(DuplicateId):
            partition([YOUNG, ta(1, [{"feature": "x", "in": ["y"]}])])

    def test_ids_must_be_contiguous(self):
        with pytest.raises(ConfigError):
            partition([YOUNG, ta(3, [{"feature": "x", "in": ["y"]}])])


class TestAssignContext:
    def setup_method(self):
        self.tas = [YOUNG, URBAN]
        self.das = partition(self.tas)

    def test_both_tas(self):
        da_id = assign_context({"age": 25, "region": "metro"}, self.tas, self.das)
        assert self.das[da_id - 1].signature == frozenset({1, 2})

    def test_only_second_ta(self):
        da_id = assign_context({"age": 60, "region": "metro"}, self.tas, self.das)
        assert self.das[da_id - 1].signature == frozenset({2})

    def test_no_ta_means_no_context(self):
        assert assign_context({"age": 60, "region": "rural"}, self.tas, self.das) is None

    def test_missing_feature(self):
        with pytest.raises(MissingFeature):
            assign_context({"age": 25}, self.tas, self.das)

    def test_bulk_agrees_with_scalar(self):
        rng = np.random.default_rng(3)
        ages = rng.integers(15, 70, size=300)
        regions = rng.choice(["metro", "urban", "rural"], size=300)
        bulk = assign_contexts_bulk(
            {"age": ages, "region": regions}, self.tas, self.das
        )
        for idx in range(300):
            user = {"age": int(ages[idx]), "region": str(regions[idx])}
            scalar = assign_context(user, self.tas, self.das)
            assert bulk[idx] == (0 if scalar is None else scalar)


class TestContextProbs:
    def test_hand_counted_sample(self):
        # 50 users only young, 30 only urban, 20 both
        sample = (
            [{"age": 20, "region": "rural"}] * 50
            + [{"age": 50, "region": "metro"}] * 30
            + [{"age": 20, "region": "metro"}] * 20
        )
        tas = [YOUNG, URBAN]
        das = partition(tas)
        probs = estimate_context_probs(sample, tas, das)
        np.testing.assert_allclose(
            probs.p_hat[:, 0], [50 / 70, 0.0, 20 / 70], atol=1e-12
        )
        np.testing.assert_allclose(
            probs.p_hat[:, 1], [0.0, 30 / 50, 20 / 50], atol=1e-12
        )

    def test_no_context_users_excluded_from_conditionals(self):
        sample = [{"age": 20, "region": "rural"}] * 10 + [
            {"age": 50, "region": "rural"}
        ] * 90
        tas = [YOUNG, URBAN]
        das = partition(tas)
        with pytest.raises(EmptyTargetAudience):
            # urban matched nobody
            estimate_context_probs(sample, tas, das)

    def test_single_cell_mass(self):
        sample = [{"age": 20, "region": "rural"}] * 5
        das = partition([YOUNG])
        probs = estimate_context_probs(sample, [YOUNG], das)
        assert probs.p_hat[0, 0] == 1.0

    def test_empty_sample(self):
        with pytest.raises(EmptyInput):
            estimate_context_probs([], [YOUNG], partition([YOUNG]))

    def test_closure_and_support(self):
        rng = np.random.default_rng(8)
        sample = [
            {"age": int(rng.integers(15, 70)), "region": str(rng.choice(["metro", "rural"]))}
            for _ in range(400)
        ]
        tas = [YOUNG, URBAN]
        das = partition(tas)
        probs = estimate_context_probs(sample, tas, das)
        probs.validate()
        for k, members in probs.overlap.items():
            total = sum(probs.p_hat[j - 1, k - 1] for j in members)
            assert abs(total - 1.0) <= 1e-9

    def test_table_shape_and_closure_enforced(self):
        das = partition([YOUNG, URBAN])
        with pytest.raises(ConfigError):
            context_probs_from_table([[1.0, 0.0]], das, 2)
        with pytest.raises(ConfigError):
            context_probs_from_table(
                [[0.5, 0.0], [0.0, 0.5], [0.4, 0.5]], das, 2
            )

    def test_overlap_map(self):
        das = partition([YOUNG, URBAN, RICH])
        overlap = overlap_map(das, 3)
        for k, da_ids in overlap.items():
            for da_id in da_ids:
                assert k in das[da_id - 1].signature
        total = sum(len(v) for v in overlap.values())
        assert total == sum(len(da.signature) for da in das)


# -- randomized structural properties ------------------------------------

FEATURES = ("age", "income", "device")
CATEGORIES = ("ios", "android", "web")


@st.composite
def ta_sets(draw):
    K = draw(st.integers(min_value=1, max_value=5))
    tas = []
    for ta_id in range(1, K + 1):
        clauses = []
        for _ in range(draw(st.integers(min_value=1, max_value=2))):
            feature = draw(st.sampled_from(FEATURES))
            if feature == "device":
                values = draw(
                    st.lists(st.sampled_from(CATEGORIES), min_size=1, unique=True)
                )
                clauses.append({"feature": feature, "in": values})
            else:
                lo = draw(st.integers(min_value=0, max_value=80))
                hi = lo + draw(st.integers(min_value=0, max_value=40))
                clauses.append({"feature": feature, "range": [lo, hi]})
        tas.append(ta(ta_id, clauses))
    return tas


@st.composite
def users(draw):
    return {
        "age": draw(st.integers(min_value=0, max_value=120)),
        "income": draw(st.integers(min_value=0, max_value=120)),
        "device": draw(st.sampled_from(CATEGORIES)),
    }


@given(tas=ta_sets(), user=users())
@settings(max_examples=200, deadline=None)
def test_assignment_is_a_function_and_spans(tas, user):
    das = partition(tas)
    assert len(das) <= 2 ** len(tas) - 1
    matching = {t.ta_id for t in tas if t.matches(user)}
    da_id = assign_context(user, tas, das)
    if not matching:
        assert da_id is None
    else:
        # exactly one DA, and its signature is exactly the matching TA set
        assert das[da_id - 1].signature == frozenset(matching)
        candidates = [da for da in das if da.signature == frozenset(matching)]
        assert len(candidates) == 1
