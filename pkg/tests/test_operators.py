"""Standardization operators on hand-derived and randomized inputs."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import all_groupings, random_dataset, random_schema, random_weight
from ratestand import (
    EMPTY_KEY,
    EmptyStratumPolicy,
    OperatorKind,
    OpResult,
    RateStatus,
    SchemaError,
    SoncFamily,
    StandardizationSpec,
    StratumKey,
    UndefinedRateError,
    WeightMeasure,
    build_from_counts,
    crude,
    rate_table,
    sca,
    sca_expanded,
    scc,
    sonc_apply,
    standardize_general,
)
from ratestand.dataio import load_schema, read_count_csv

SCHEMA = load_schema("tests/data/toy_registry/schema.json")
D1992 = read_count_csv("tests/data/toy_registry/y1992.csv", SCHEMA, period="1992")
D2000 = read_count_csv("tests/data/toy_registry/y2000.csv", SCHEMA, period="2000")
M = StratumKey.of(sex="M")
F = StratumKey.of(sex="F")


def test_crude_hand_values():
    assert crude(D1992, M).value == Fraction(13, 110)
    assert crude(D1992, F).value == Fraction(23, 250)
    assert crude(D2000, M).value == Fraction(1, 5)
    assert crude(D1992, EMPTY_KEY).value == Fraction(49, 470)


def test_crude_rejects_non_risk_factor_key():
    with pytest.raises(SchemaError):
        crude(D1992, StratumKey.of(sex="X"))


def test_sca_hand_values_against_year_2000_age_weights():
    # 2000 age marginal: young 300/500, old 200/500
    w_age = WeightMeasure.empirical(D2000, ("age",))
    assert sca(D1992, M, w_age).value == Fraction(3, 20)
    assert sca(D1992, F, w_age).value == Fraction(11, 100)
    assert sca(D2000, M, w_age).value == Fraction(9, 50)


def test_scc_hand_values_against_year_2000_standard():
    assert scc(D1992, M, D2000).value == Fraction(7, 40)
    assert scc(D1992, F, D2000).value == Fraction(1, 10)
    assert scc(D2000, M, D2000).value == Fraction(1, 5)


def test_sca_equals_expanded_double_sum_on_toy():
    w_age = WeightMeasure.empirical(D2000, ("age",))
    for dist in (D1992, D2000):
        for e1 in (M, F):
            assert sca(dist, e1, w_age).value == sca_expanded(dist, e1, w_age).value


def test_sca_overrides_a_coordinates_present_in_e1():
    w_age = WeightMeasure.empirical(D2000, ("age",))
    assert (
        sca(D1992, StratumKey.of(sex="M", age="old"), w_age).value
        == sca(D1992, M, w_age).value
    )
    assert (
        sca_expanded(D1992, StratumKey.of(age="old"), w_age).value
        == sca_expanded(D1992, EMPTY_KEY, w_age).value
    )


def test_scc_with_empty_residual_is_crude():
    full = StratumKey.of(sex="M", age="old")
    assert scc(D1992, full, D2000).value == crude(D1992, full).value


def test_scc_self_weighting_reproduces_crude_exactly():
    for e1 in (EMPTY_KEY, M, F, StratumKey.of(age="young")):
        assert scc(D1992, e1, D1992).value == crude(D1992, e1).value


def test_scc_accepts_joint_weight_standard_and_conditions_extras():
    joint = WeightMeasure.empirical(D2000, ("sex", "age"))
    # covers e1 too: the e1 coordinates are conditioned away, matching the
    # distribution standard exactly
    assert scc(D1992, M, joint).value == scc(D1992, M, D2000).value
    # a weight over only the residual covariates is used as-is
    marg = WeightMeasure.empirical(D2000, ("age",))
    assert scc(D1992, M, marg).value == Fraction(3, 20)


def test_scc_weight_standard_must_cover_residual():
    sex_only = WeightMeasure.empirical(D2000, ("sex",))
    with pytest.raises(SchemaError):
        scc(D1992, M, sex_only)


def test_standardize_general_partial_weight():
    # weight on a strict subset of the residual covariates: each term is
    # the crude rate of a coarser slice
    w_age = WeightMeasure.empirical(D2000, ("age",))
    r = standardize_general(D1992, EMPTY_KEY, w_age)
    expected = Fraction(3, 5) * D1992.crude_fraction(
        StratumKey.of(age="young")
    ) + Fraction(2, 5) * D1992.crude_fraction(StratumKey.of(age="old"))
    assert r.value == expected


SPARSE = build_from_counts(
    [
        ({"sex": "M", "age": "young"}, 1, 10),
        ({"sex": "F", "age": "old"}, 3, 10),
    ],
    SCHEMA,
    "sparse",
)


def test_policy_strict_raises_on_missing_stratum():
    w = WeightMeasure.uniform(SCHEMA, ("age",))
    with pytest.raises(UndefinedRateError):
        sca(SPARSE, M, w)
    with pytest.raises(UndefinedRateError):
        crude(SPARSE, StratumKey.of(sex="M", age="old"))


def test_policy_renormalize_drops_and_records_mass():
    w = WeightMeasure.uniform(SCHEMA, ("age",))
    r = sca(SPARSE, M, w, policy=EmptyStratumPolicy.RENORMALIZE)
    assert r.status is RateStatus.OK
    assert r.value == Fraction(1, 10)
    assert r.dropped_mass == Fraction(1, 2)
    assert r.empty_strata == (StratumKey.of(sex="M", age="old"),)
    r2 = sca_expanded(SPARSE, M, w, policy=EmptyStratumPolicy.RENORMALIZE)
    assert (r2.value, r2.dropped_mass, r2.empty_strata) == (
        r.value,
        r.dropped_mass,
        r.empty_strata,
    )


def test_policy_zero_keeps_weights_and_counts_missing_as_zero():
    joint = WeightMeasure.uniform(SCHEMA, ("sex", "age"))
    r = scc(SPARSE, EMPTY_KEY, joint, policy=EmptyStratumPolicy.ZERO)
    assert r.value == Fraction(1, 10)  # (1/10 + 3/10) / 4
    assert r.dropped_mass == Fraction(1, 2)
    assert len(r.empty_strata) == 2


def test_policy_renormalize_with_nothing_left_is_undefined():
    w = WeightMeasure.point(SCHEMA, StratumKey.of(age="old"))
    r = sca(SPARSE, M, w, policy=EmptyStratumPolicy.RENORMALIZE)
    assert r.status is RateStatus.UNDEFINED
    assert r.value is None
    assert r.dropped_mass == 1
    assert not r.is_defined


def test_opresult_rate_is_float_emission():
    r = OpResult(Fraction(13, 110))
    assert r.rate == pytest.approx(13 / 110)
    undefined = OpResult(None, RateStatus.UNDEFINED, Fraction(1), ())
    with pytest.raises(UndefinedRateError):
        undefined.rate


def test_sonc_family_from_standard_matches_scc():
    fam = SoncFamily.from_standard(D2000, ("sex",))
    for e1 in (M, F):
        assert sonc_apply(D1992, e1, fam).value == scc(D1992, e1, D2000).value


def test_sonc_constant_family_matches_general():
    w_age = WeightMeasure.empirical(D2000, ("age",))
    fam = SoncFamily.constant(SCHEMA, ("sex",), w_age)
    for e1 in (M, F):
        assert (
            sonc_apply(D1992, e1, fam).value
            == standardize_general(D1992, e1, w_age).value
        )


def test_sonc_apply_rejects_wrong_grouping():
    fam = SoncFamily.from_standard(D2000, ("sex",))
    with pytest.raises(SchemaError):
        sonc_apply(D1992, StratumKey.of(age="old"), fam)


def test_rate_table_self_and_period_standards():
    w_age = WeightMeasure.empirical(D2000, ("age",))
    specs = [
        ("crude", StandardizationSpec(OperatorKind.CRUDE)),
        ("sca", StandardizationSpec(OperatorKind.SCA, weight=w_age)),
        ("scc_self", StandardizationSpec(OperatorKind.SCC, standard_period="self")),
        ("scc_2000", StandardizationSpec(OperatorKind.SCC, standard_period="2000")),
    ]
    table = rate_table(D1992, ("sex",), specs, standards={"2000": D2000})
    assert table.result(M, "crude").value == Fraction(13, 110)
    assert table.result(M, "sca").value == Fraction(3, 20)
    assert table.result(M, "scc_self").value == Fraction(13, 110)
    assert table.result(M, "scc_2000").value == Fraction(7, 40)
    assert table.rate(M, "scc_2000") == pytest.approx(0.175)


def test_rate_table_unknown_standard_period():
    specs = [("scc", StandardizationSpec(OperatorKind.SCC, standard_period="1980"))]
    with pytest.raises(SchemaError):
        rate_table(D1992, ("sex",), specs, standards={"2000": D2000})


def test_spec_validation():
    with pytest.raises(SchemaError):
        StandardizationSpec(OperatorKind.SCA)
    with pytest.raises(SchemaError):
        StandardizationSpec(OperatorKind.SCC)
    with pytest.raises(SchemaError):
        StandardizationSpec(OperatorKind.SONC)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_sca_routes_agree_on_random_sparse_data(seed):
    """The direct and fully expanded single-covariate routes return the
    same value, status, and dropped mass on arbitrary sparse inputs."""
    rng = random.Random(seed)
    schema = random_schema(rng, min_covariates=2, max_covariates=4)
    dist = random_dataset(rng, schema, empty_prob=0.25)
    rf = schema.risk_factors
    a = (rng.choice(rf),)
    w = random_weight(rng, schema, a)
    e1_names = tuple(n for n in rf if n not in a and rng.random() < 0.5)
    for e1 in schema.strata(e1_names):
        r1 = sca(dist, e1, w, policy=EmptyStratumPolicy.RENORMALIZE)
        r2 = sca_expanded(dist, e1, w, policy=EmptyStratumPolicy.RENORMALIZE)
        assert r1.status == r2.status
        assert r1.dropped_mass == r2.dropped_mass
        if r1.is_defined:
            assert r1.value == r2.value


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_scc_self_weighting_on_random_data(seed):
    rng = random.Random(seed)
    schema = random_schema(rng, max_covariates=4)
    dist = random_dataset(rng, schema, empty_prob=0.15)
    for e1_names in all_groupings(schema):
        for e1 in schema.strata(e1_names):
            if dist.count(e1).total == 0:
                continue
            assert scc(dist, e1, dist).value == crude(dist, e1).value
