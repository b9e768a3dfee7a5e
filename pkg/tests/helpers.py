"""Deterministic corpus builders shared across the suite.

Everything is built from integer counts so identity checks can compare
exact rationals instead of leaning on float tolerances.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from ratestand import (
    CovariateSchema,
    EmpiricalJoint,
    StratumKey,
    WeightMeasure,
    build_from_counts,
)

CORPUS_SEED = 20260815
NAMES = ("sex", "age", "race", "stage", "region")
LEVEL_POOL = "abcd"
TOTALS = (20, 40, 50, 80, 100, 160, 200, 250, 400, 500)
MAX_CELLS = 64


def random_schema(
    rng: random.Random,
    *,
    min_covariates: int = 1,
    max_covariates: int = 5,
    max_levels: int = 4,
) -> CovariateSchema:
    """Random categorical schema, rejection-sampled to at most MAX_CELLS
    full strata so exhaustive sweeps stay fast."""
    level_counts = tuple(k for k in (2, 2, 2, 3, 4) if k <= max_levels)
    while True:
        n = rng.randint(min_covariates, max_covariates)
        names = sorted(rng.sample(NAMES, n))
        columns = {
            name: tuple(LEVEL_POOL[: rng.choice(level_counts)]) for name in names
        }
        cells = 1
        for levels in columns.values():
            cells *= len(levels)
        if cells <= MAX_CELLS:
            return CovariateSchema.of(columns, risk_factors=names)


def random_dataset(
    rng: random.Random,
    schema: CovariateSchema,
    *,
    period: str = "t0",
    empty_prob: float = 0.1,
) -> EmpiricalJoint:
    """Counts over the full cross-product; individual cells may be empty
    (exercising the zero-mass paths) but never all of them."""
    while True:
        rows = []
        for key in schema.strata(schema.risk_factors):
            if rng.random() < empty_prob:
                continue
            total = rng.choice(TOTALS)
            rows.append((key.as_dict(), rng.randint(0, total), total))
        if rows:
            return build_from_counts(rows, schema, period)


def random_corpus(
    n: int, *, seed: int = CORPUS_SEED, empty_prob: float = 0.1
) -> list[EmpiricalJoint]:
    rng = random.Random(seed)
    return [
        random_dataset(rng, random_schema(rng), period=f"t{i}", empty_prob=empty_prob)
        for i in range(n)
    ]


def all_groupings(schema: CovariateSchema):
    """Every subset of the risk factors, by size (empty and full included)."""
    rf = schema.risk_factors
    for r in range(len(rf) + 1):
        yield from itertools.combinations(rf, r)


def random_weight(
    rng: random.Random, schema: CovariateSchema, names
) -> WeightMeasure:
    """Full-support weight with random positive integer masses."""
    counts = {key: rng.randint(1, 50) for key in schema.strata(names)}
    return WeightMeasure.from_counts(schema, names, counts)


def cell_mixture(dist: EmpiricalJoint, e1: StratumKey, e2_names) -> Fraction:
    """Mixture of slice rates under the slice population shares, computed
    straight from the raw cells (the right side of the reconstruction
    identity, independent of the operator implementations)."""
    slices: dict[StratumKey, list[int]] = {}
    for key, cell in dist.cells.items():
        if not e1.matches(key):
            continue
        agg = slices.setdefault(key.project(e2_names), [0, 0])
        agg[0] += cell.cases
        agg[1] += cell.total
    pop = sum(t for _, t in slices.values())
    if pop == 0:
        raise ValueError(f"no population in stratum {e1}")
    return sum(
        (Fraction(t, pop) * Fraction(c, t) for c, t in slices.values() if t),
        Fraction(0),
    )


def shared_rate_pair(
    rng: random.Random, *, periods: tuple[str, str] = ("p0", "p1")
) -> tuple[EmpiricalJoint, EmpiricalJoint]:
    """Two full-support datasets with identical finest-crude rates but
    different covariate joints: per cell the case fraction is a fixed k/20
    while the totals are drawn independently per period."""
    schema = random_schema(rng, min_covariates=2, max_covariates=4)
    totals_pool = tuple(t for t in TOTALS if t % 20 == 0)
    keys = list(schema.strata(schema.risk_factors))
    rates = {key: Fraction(rng.randint(1, 19), 20) for key in keys}
    while True:
        dists = []
        for period in periods:
            rows = []
            for key in keys:
                total = rng.choice(totals_pool)
                rows.append((key.as_dict(), int(rates[key] * total), total))
            dists.append(build_from_counts(rows, schema, period))
        a, b = dists
        if any(a.cells[k].total != b.cells[k].total for k in keys):
            return a, b


def product_form_dataset(
    rng: random.Random,
    *,
    a_name: str = "age",
    period: str = "t0",
) -> tuple[EmpiricalJoint, str]:
    """Full-support dataset whose population factorizes as
    g(non-A covariates) x h(A level): within every non-A stratum the A
    covariate has the same conditional distribution, and vice versa. That
    is exactly the regime in which single-covariate and complete
    standardization against the dataset's own weights coincide."""
    other = sorted(rng.sample([n for n in NAMES if n != a_name], rng.randint(2, 3)))
    names = sorted([a_name, *other])
    columns = {name: tuple(LEVEL_POOL[: rng.randint(2, 3)]) for name in names}
    schema = CovariateSchema.of(columns, risk_factors=names)
    h = {level: rng.randint(1, 5) for level in columns[a_name]}
    rows = []
    for rest in schema.strata(other):
        g = rng.choice((20, 40, 60, 100))
        for level in columns[a_name]:
            key = rest.merge(StratumKey.of(**{a_name: level}))
            total = g * h[level]
            rows.append((key.as_dict(), rng.randint(0, total // 2), total))
    return build_from_counts(rows, schema, period), a_name


def move_population(
    dist: EmpiricalJoint, src: StratumKey, dst: StratumKey, n: int
) -> EmpiricalJoint:
    """Move n disease-free individuals from one full stratum to another."""
    src_cell = dist.cells[src]
    if src_cell.total - src_cell.cases < n:
        raise ValueError(f"not enough disease-free individuals in {src}")
    rows = []
    for key, cell in dist.rows():
        cases, total = cell.cases, cell.total
        if key == src:
            total -= n
        elif key == dst:
            total += n
        rows.append((key.as_dict(), cases, total))
    return build_from_counts(rows, dist.schema, dist.period)
