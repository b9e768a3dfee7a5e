"""Stratum keys, schemas, and factorizations."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ratestand import (
    EMPTY_KEY,
    CovariateSchema,
    Factorization,
    SchemaError,
    StratumKey,
    valid_level,
)

SCHEMA = CovariateSchema.of(
    {"sex": ("M", "F"), "age": ("young", "old"), "area": ("urban", "rural")},
    risk_factors=("sex", "age", "area"),
)


def test_key_is_canonical_regardless_of_insertion_order():
    assert StratumKey.of(sex="M", age="old") == StratumKey.of(age="old", sex="M")
    assert hash(StratumKey.of(sex="M", age="old")) == hash(
        StratumKey.of(age="old", sex="M")
    )


def test_key_accessors():
    key = StratumKey.of(sex="M", age="old")
    assert key.names == {"sex", "age"}
    assert key.get("age") == "old"
    assert key.as_dict() == {"age": "old", "sex": "M"}
    with pytest.raises(KeyError):
        key.get("area")


def test_project_restricts_and_rejects_missing():
    key = StratumKey.of(sex="M", age="old", area="urban")
    assert key.project(("sex",)) == StratumKey.of(sex="M")
    assert key.project(()) == EMPTY_KEY
    with pytest.raises(SchemaError):
        StratumKey.of(sex="M").project(("age",))


def test_merge_requires_disjoint_names():
    merged = StratumKey.of(sex="M").merge(StratumKey.of(age="old"))
    assert merged == StratumKey.of(sex="M", age="old")
    with pytest.raises(SchemaError):
        StratumKey.of(sex="M").merge(StratumKey.of(sex="F"))


def test_matches_is_partial_key_agreement():
    full = StratumKey.of(sex="M", age="old", area="urban")
    assert StratumKey.of(sex="M").matches(full)
    assert EMPTY_KEY.matches(full)
    assert not StratumKey.of(sex="F").matches(full)


def test_valid_level_alphabet():
    assert valid_level("a_B-9")
    assert not valid_level("with space")
    assert not valid_level("comma,level")
    assert not valid_level("")


def test_schema_rejects_bad_levels_and_duplicates():
    with pytest.raises(SchemaError):
        CovariateSchema.of({"sex": ("M", "M")}, risk_factors=("sex",))
    with pytest.raises(SchemaError):
        CovariateSchema.of({"sex": ("M", "has space")}, risk_factors=("sex",))
    with pytest.raises(SchemaError):
        CovariateSchema.of({"sex": ("M", "F")}, risk_factors=("age",))


def test_strata_order_first_column_slowest():
    keys = list(SCHEMA.strata(("sex", "age")))
    assert keys == [
        StratumKey.of(sex="M", age="young"),
        StratumKey.of(sex="M", age="old"),
        StratumKey.of(sex="F", age="young"),
        StratumKey.of(sex="F", age="old"),
    ]
    assert list(SCHEMA.strata(())) == [EMPTY_KEY]


def test_ordered_names_follows_schema_columns():
    assert SCHEMA.ordered_names(("area", "sex")) == ("sex", "area")
    with pytest.raises(SchemaError):
        SCHEMA.ordered_names(("height",))


def test_sort_index_matches_strata_order():
    keys = list(SCHEMA.strata(("sex", "area")))
    assert keys == sorted(keys, key=SCHEMA.sort_index)


def test_validate_key_checks_levels_and_scope():
    SCHEMA.validate_key(StratumKey.of(sex="M"))
    with pytest.raises(SchemaError):
        SCHEMA.validate_key(StratumKey.of(sex="X"))
    with pytest.raises(SchemaError):
        SCHEMA.validate_key(StratumKey.of(sex="M"), within=("age",))


def test_restrict_preserves_level_order():
    cohort = SCHEMA.restrict({"age": ("old",)})
    assert cohort.levels("age") == ("old",)
    assert cohort.levels("sex") == ("M", "F")
    with pytest.raises(SchemaError):
        SCHEMA.restrict({"age": ("ancient",)})


def test_factorization_partitions_risk_factors():
    fact = Factorization.of(SCHEMA, ("sex",))
    assert fact.e1_names == ("sex",)
    assert fact.e2_names == ("age", "area")
    assert set(fact.all_names) == set(SCHEMA.risk_factors)
    full = Factorization.of(SCHEMA, SCHEMA.risk_factors)
    assert full.e2_names == ()
    with pytest.raises(SchemaError):
        Factorization.of(SCHEMA, ("height",))


@given(
    st.permutations(
        [("sex", "M"), ("age", "old"), ("area", "urban"), ("race", "a")]
    )
)
def test_key_equality_is_order_invariant(items):
    assert StratumKey(tuple(items)) == StratumKey(
        tuple(sorted(items))
    )


@given(st.sets(st.sampled_from(("sex", "age", "area")), max_size=3))
def test_projection_idempotent(names):
    key = StratumKey.of(sex="M", age="old", area="urban")
    sub = key.project(names)
    assert sub.project(names) == sub
    assert sub.matches(key)
