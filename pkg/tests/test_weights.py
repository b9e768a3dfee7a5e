"""Weight measures: exact masses, normalization, and calculus."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_dataset, random_schema
from ratestand import (
    NORMALIZATION_TOL,
    CovariateSchema,
    SchemaError,
    StratumKey,
    WeightError,
    WeightMeasure,
    build_from_counts,
    exact_fraction,
)

SCHEMA = CovariateSchema.of(
    {"sex": ("M", "F"), "age": ("young", "old")}, risk_factors=("sex", "age")
)


def test_exact_fraction_accepts_common_forms():
    assert exact_fraction("1/3") == Fraction(1, 3)
    assert exact_fraction("0.25") == Fraction(1, 4)
    assert exact_fraction(Fraction(2, 5)) == Fraction(2, 5)
    assert exact_fraction(0.5) == Fraction(1, 2)


def test_from_mapping_normalizes_near_one_and_rejects_far():
    w = WeightMeasure.from_mapping(
        SCHEMA, ("sex",), {StratumKey.of(sex="M"): 0.3, StratumKey.of(sex="F"): 0.7}
    )
    assert sum(m for _, m in w.items()) == 1
    with pytest.raises(WeightError):
        WeightMeasure.from_mapping(
            SCHEMA, ("sex",), {StratumKey.of(sex="M"): 0.3, StratumKey.of(sex="F"): 0.6}
        )


def test_masses_must_be_nonnegative():
    with pytest.raises(WeightError):
        WeightMeasure.from_mapping(
            SCHEMA,
            ("sex",),
            {StratumKey.of(sex="M"): Fraction(3, 2), StratumKey.of(sex="F"): Fraction(-1, 2)},
        )


def test_zero_masses_drop_out_of_support():
    w = WeightMeasure.from_mapping(
        SCHEMA, ("sex",), {StratumKey.of(sex="M"): 1, StratumKey.of(sex="F"): 0}
    )
    assert w.support() == [StratumKey.of(sex="M")]
    assert w.mass_of(StratumKey.of(sex="F")) == 0


def test_names_must_be_risk_factors():
    both = CovariateSchema.of(
        {"sex": ("M", "F"), "ward": ("w1", "w2")}, risk_factors=("sex",)
    )
    with pytest.raises(SchemaError):
        WeightMeasure.uniform(both, ("ward",))


def test_from_counts_is_exact():
    w = WeightMeasure.from_counts(
        SCHEMA, ("sex",), {StratumKey.of(sex="M"): 3, StratumKey.of(sex="F"): 7}
    )
    assert w.mass_of(StratumKey.of(sex="M")) == Fraction(3, 10)


def test_empirical_marginal_and_conditional():
    dist = build_from_counts(
        [
            ({"sex": "M", "age": "young"}, 1, 100),
            ({"sex": "M", "age": "old"}, 1, 100),
            ({"sex": "F", "age": "young"}, 1, 200),
            ({"sex": "F", "age": "old"}, 1, 100),
        ],
        SCHEMA,
        "x",
    )
    w = WeightMeasure.empirical(dist, ("sex",))
    assert w.mass_of(StratumKey.of(sex="F")) == Fraction(3, 5)
    given_f = WeightMeasure.empirical(dist, ("age",), given=StratumKey.of(sex="F"))
    assert given_f.mass_of(StratumKey.of(age="young")) == Fraction(2, 3)


def test_point_and_uniform():
    p = WeightMeasure.point(SCHEMA, StratumKey.of(sex="M"))
    assert p.mass_of(StratumKey.of(sex="M")) == 1
    u = WeightMeasure.uniform(SCHEMA, ("sex", "age"))
    assert u.mass_of(StratumKey.of(sex="F", age="old")) == Fraction(1, 4)


def test_marginal_and_condition_laws():
    joint = WeightMeasure.from_counts(
        SCHEMA,
        ("sex", "age"),
        {
            StratumKey.of(sex="M", age="young"): 1,
            StratumKey.of(sex="M", age="old"): 2,
            StratumKey.of(sex="F", age="young"): 3,
            StratumKey.of(sex="F", age="old"): 4,
        },
    )
    marg = joint.marginal(("sex",))
    assert marg.mass_of(StratumKey.of(sex="M")) == Fraction(3, 10)
    cond = joint.condition(StratumKey.of(sex="F"))
    assert cond.mass_of(StratumKey.of(age="old")) == Fraction(4, 7)
    with pytest.raises(WeightError):
        # all mass sits on sex=M, so the conditioning event is null
        WeightMeasure.from_mapping(
            SCHEMA,
            ("sex", "age"),
            {
                StratumKey.of(sex="M", age="young"): Fraction(1, 2),
                StratumKey.of(sex="M", age="old"): Fraction(1, 2),
            },
        ).condition(StratumKey.of(sex="F"))
    with pytest.raises(SchemaError):
        joint.condition(StratumKey.of(sex="F", age="old"))


def test_product_measure():
    a = WeightMeasure.from_counts(
        SCHEMA, ("sex",), {StratumKey.of(sex="M"): 1, StratumKey.of(sex="F"): 3}
    )
    b = WeightMeasure.uniform(SCHEMA, ("age",))
    ab = a.product(b)
    assert set(ab.names) == {"sex", "age"}
    assert ab.mass_of(StratumKey.of(sex="F", age="old")) == Fraction(3, 8)


def test_as_float_dict_sums_near_one():
    u = WeightMeasure.uniform(SCHEMA, ("sex", "age"))
    floats = u.as_float_dict()
    assert abs(sum(floats.values()) - 1.0) < NORMALIZATION_TOL


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_empirical_weights_always_normalize_exactly(seed):
    rng = random.Random(seed)
    schema = random_schema(rng, max_covariates=3)
    dist = random_dataset(rng, schema, empty_prob=0.3)
    names = schema.risk_factors[: rng.randint(1, len(schema.risk_factors))]
    w = WeightMeasure.empirical(dist, names)
    assert sum(m for _, m in w.items()) == 1
    marg = w.marginal(names[:1])
    assert sum(m for _, m in marg.items()) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_conditioning_renormalizes_exactly(seed):
    rng = random.Random(seed)
    schema = random_schema(rng, min_covariates=2, max_covariates=3)
    dist = random_dataset(rng, schema, empty_prob=0.0)
    w = WeightMeasure.empirical(dist, schema.risk_factors)
    pick = rng.choice(list(schema.strata(schema.risk_factors[:1])))
    cond = w.condition(pick)
    assert sum(m for _, m in cond.items()) == 1
    assert all(pick.names.isdisjoint(k.names) for k, _ in cond.items())
