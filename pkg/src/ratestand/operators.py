"""Standardized-rate operators over empirical distributions.

All operators share one shape: a reported rate for a grouping stratum e1 is
a weighted average of crude rates over finer strata,

    S(e1) = sum_w P(D | e1, w) * weight(w),

differing only in which covariates carry the weight and where the weight
comes from:

* crude             weight = the distribution's own covariate shares
* standardize_general  caller-chosen weight over any covariates outside e1
* sca               weight over a distinguished covariate set A, replacing
                    any A-coordinates of e1
* scc               weight = a standard's conditional distribution of all
                    remaining covariates given e1
* sonc_apply        an arbitrary per-stratum family of weights over the
                    remaining covariates

Sums are evaluated in exact rational arithmetic; floats appear only when a
result is read out through OpResult.rate.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .distribution import EmpiricalJoint
from .errors import SchemaError, UndefinedRateError, WeightError
from .schema import CovariateSchema, StratumKey
from .weights import WeightMeasure


class EmptyStratumPolicy(enum.Enum):
    """What to do when a weighted stratum has no population in the data.

    STRICT       raise UndefinedRateError (default; silence hides bias)
    RENORMALIZE  drop the unsupported weight mass and rescale the rest
    ZERO         keep the mass but contribute rate zero for it (biases the
                 result toward zero; only defensible when absent strata are
                 known to be disease-free)
    """

    STRICT = "strict"
    RENORMALIZE = "renormalize"
    ZERO = "zero"


class RateStatus(enum.Enum):
    OK = "ok"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class OpResult:
    """Outcome of one operator evaluation at one grouping stratum.

    value is the exact rational rate, or None when undefined. dropped_mass
    is the standard-weight mass not backed by data: under RENORMALIZE it was
    removed before rescaling, under ZERO it stayed in place at rate zero.
    """

    value: Fraction | None
    status: RateStatus = RateStatus.OK
    dropped_mass: Fraction = Fraction(0)
    empty_strata: tuple[StratumKey, ...] = ()

    def __post_init__(self):
        if (self.value is None) != (self.status is RateStatus.UNDEFINED):
            raise ValueError("value and status disagree")

    @property
    def is_defined(self) -> bool:
        return self.status is RateStatus.OK

    @property
    def rate(self) -> float:
        if self.value is None:
            raise UndefinedRateError("rate is undefined for this stratum")
        return float(self.value)


def _undefined(dropped: Fraction, empty: tuple[StratumKey, ...]) -> OpResult:
    return OpResult(None, RateStatus.UNDEFINED, dropped, empty)


def crude(
    dist: EmpiricalJoint,
    e1: StratumKey,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> OpResult:
    """Observed rate in the stratum, self-weighted by construction."""
    dist.schema.validate_key(e1, within=dist.schema.risk_factors)
    try:
        return OpResult(dist.crude_fraction(e1))
    except UndefinedRateError:
        if policy is EmptyStratumPolicy.STRICT:
            raise
        return _undefined(Fraction(1), (e1,))


def standardize_general(
    dist: EmpiricalJoint,
    e1: StratumKey,
    weight: WeightMeasure,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> OpResult:
    """Weighted average of crude rates over the weight's covariates.

    The weight may live on any risk-factor subset disjoint from e1; it need
    not exhaust the covariates outside e1, in which case each term is the
    crude (marginal) rate of the coarser combined stratum.
    """
    dist.schema.validate_key(e1, within=dist.schema.risk_factors)
    if weight.schema != dist.schema:
        raise SchemaError("weight and distribution use different schemas")
    overlap = set(weight.names) & e1.names
    if overlap:
        raise SchemaError(f"weight covariates {sorted(overlap)} already fixed by e1")

    acc = Fraction(0)
    dropped = Fraction(0)
    empty: list[StratumKey] = []
    kept = Fraction(0)
    for w_key, w_mass in weight.items():
        cell = e1.merge(w_key)
        try:
            r = dist.crude_fraction(cell)
        except UndefinedRateError:
            if policy is EmptyStratumPolicy.STRICT:
                raise UndefinedRateError(
                    f"standard weight {w_mass} falls on empty stratum {cell}",
                    condition=cell,
                ) from None
            dropped += w_mass
            empty.append(cell)
            continue
        acc += w_mass * r
        kept += w_mass
    if policy is EmptyStratumPolicy.RENORMALIZE and empty:
        if kept == 0:
            return _undefined(dropped, tuple(empty))
        acc /= kept
    return OpResult(acc, RateStatus.OK, dropped, tuple(empty))


def sca(
    dist: EmpiricalJoint,
    e1: StratumKey,
    a_weight: WeightMeasure,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> OpResult:
    """Single-covariate standardization: average the crude rates of the
    A-slices of e1 under an external weight for A, ignoring how the other
    covariates distribute within each slice.

    Any A-coordinates already present in e1 are overridden by the average.
    """
    dist.schema.validate_key(e1, within=dist.schema.risk_factors)
    e1a = e1.project(n for n in dist.schema.risk_factors
                     if n in e1.names and n not in set(a_weight.names))
    return standardize_general(dist, e1a, a_weight, policy=policy)


def sca_expanded(
    dist: EmpiricalJoint,
    e1: StratumKey,
    a_weight: WeightMeasure,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> OpResult:
    """sca computed by the fully expanded double sum

        sum_a w(a) sum_z P(D | e1', a, z) * P(z | e1', a)

    over the residual covariates z, with e1' the A-free part of e1. This is
    an independent evaluation route kept deliberately separate from sca: the
    two must agree exactly, and that agreement is a tested invariant, so do
    not fold one into the other.
    """
    schema = dist.schema
    schema.validate_key(e1, within=schema.risk_factors)
    a_names = set(a_weight.names)
    e1a = e1.project(n for n in schema.risk_factors
                     if n in e1.names and n not in a_names)
    z_names = tuple(
        n for n in schema.risk_factors if n not in a_names and n not in e1a.names
    )

    acc = Fraction(0)
    dropped = Fraction(0)
    empty: list[StratumKey] = []
    kept = Fraction(0)
    for a_key, a_mass in a_weight.items():
        slice_key = e1a.merge(a_key)
        _, slice_total = dist.count(slice_key)
        if slice_total == 0:
            if policy is EmptyStratumPolicy.STRICT:
                raise UndefinedRateError(
                    f"standard weight {a_mass} falls on empty stratum {slice_key}",
                    condition=slice_key,
                )
            dropped += a_mass
            empty.append(slice_key)
            continue
        inner = Fraction(0)
        for z_key, cell in dist.grouped(z_names + tuple(slice_key.names)).items():
            if not slice_key.matches(z_key):
                continue
            share = Fraction(cell.total, slice_total)
            inner += Fraction(cell.cases, cell.total) * share
        acc += a_mass * inner
        kept += a_mass
    if policy is EmptyStratumPolicy.RENORMALIZE and empty:
        if kept == 0:
            return _undefined(dropped, tuple(empty))
        acc /= kept
    return OpResult(acc, RateStatus.OK, dropped, tuple(empty))


def scc(
    dist: EmpiricalJoint,
    e1: StratumKey,
    standard: EmpiricalJoint | WeightMeasure,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> OpResult:
    """Complete-conditional standardization: weight every covariate outside
    e1 by the standard's conditional distribution given e1.

    The standard is either another period's distribution on the same schema
    or a joint weight measure covering at least the outside covariates (any
    e1 covariates it also carries are conditioned away). A distribution used
    as its own standard reproduces its crude rates exactly.
    """
    schema = dist.schema
    schema.validate_key(e1, within=schema.risk_factors)
    e2_names = tuple(n for n in schema.risk_factors if n not in e1.names)
    if not e2_names:
        return crude(dist, e1, policy=policy)

    if isinstance(standard, EmpiricalJoint):
        if standard.schema != schema:
            raise SchemaError("standard and distribution use different schemas")
        try:
            weight = WeightMeasure.empirical(standard, e2_names, given=e1)
        except WeightError:
            # the standard has nobody in this stratum, so its conditional
            # does not exist; that is an undefinedness, not a weight bug
            if policy is EmptyStratumPolicy.STRICT:
                raise UndefinedRateError(
                    f"standard period {standard.period!r} has no individuals "
                    f"in stratum {e1}",
                    condition=e1,
                ) from None
            return _undefined(Fraction(1), (e1,))
    elif isinstance(standard, WeightMeasure):
        if standard.schema != schema:
            raise SchemaError("standard and distribution use different schemas")
        missing = set(e2_names) - set(standard.names)
        if missing:
            raise SchemaError(
                f"standard weight does not cover {sorted(missing)}"
            )
        extra = set(standard.names) - set(e2_names)
        if extra - e1.names:
            raise SchemaError(
                f"standard weight covers {sorted(extra - e1.names)} which are "
                "neither grouping nor outside covariates"
            )
        weight = standard.condition(e1.project(extra)) if extra else standard
    else:
        raise TypeError(f"unsupported standard type {type(standard).__name__}")
    return standardize_general(dist, e1, weight, policy=policy)


@dataclass(frozen=True)
class SoncFamily:
    """A per-stratum family of standard weights: one measure over the
    outside covariates for every grouping stratum. scc is the special case
    drawn from a single standard's conditionals; arbitrary families cover
    everything else the complete-conditional shape allows.
    """

    schema: CovariateSchema
    e1_names: tuple[str, ...]
    e2_names: tuple[str, ...]
    table: Mapping[StratumKey, WeightMeasure]

    def __post_init__(self):
        e1 = self.schema.ordered_names(self.e1_names)
        e2 = self.schema.ordered_names(self.e2_names)
        expected = tuple(n for n in self.schema.risk_factors if n not in set(e1))
        if e2 != expected:
            raise SchemaError(
                f"family must weight exactly the covariates outside "
                f"{list(e1)}, i.e. {list(expected)}"
            )
        object.__setattr__(self, "e1_names", e1)
        object.__setattr__(self, "e2_names", e2)
        for key, measure in self.table.items():
            if key.names != set(e1):
                raise SchemaError(f"family key {key} does not cover {list(e1)}")
            self.schema.validate_key(key)
            if measure.schema != self.schema or measure.names != e2:
                raise SchemaError(f"family weight at {key} does not cover {list(e2)}")
        object.__setattr__(self, "table", dict(self.table))

    @classmethod
    def from_standard(
        cls, standard: EmpiricalJoint, e1_names: Iterable[str]
    ) -> SoncFamily:
        """The family whose application reproduces scc against standard.
        Grouping strata absent from the standard get no entry."""
        schema = standard.schema
        e1 = schema.ordered_names(e1_names)
        e2 = tuple(n for n in schema.risk_factors if n not in set(e1))
        table = {}
        for key in schema.strata(e1):
            try:
                table[key] = WeightMeasure.empirical(standard, e2, given=key)
            except WeightError:
                continue
        return cls(schema, e1, e2, table)

    @classmethod
    def constant(
        cls,
        schema: CovariateSchema,
        e1_names: Iterable[str],
        weight: WeightMeasure,
    ) -> SoncFamily:
        """The same marginal weight for every grouping stratum."""
        e1 = schema.ordered_names(e1_names)
        return cls(
            schema,
            e1,
            weight.names,
            {key: weight for key in schema.strata(e1)},
        )

    def weight_for(self, e1: StratumKey) -> WeightMeasure:
        try:
            return self.table[e1]
        except KeyError:
            raise WeightError(f"family has no weight for stratum {e1}") from None

    def support(self) -> list[StratumKey]:
        return sorted(self.table, key=self.schema.sort_index)


def sonc_apply(
    dist: EmpiricalJoint,
    e1: StratumKey,
    family: SoncFamily,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> OpResult:
    """Standardize with the family's weight for this stratum."""
    if set(family.e1_names) != e1.names:
        raise SchemaError(
            f"stratum {e1} does not match family grouping {list(family.e1_names)}"
        )
    return standardize_general(dist, e1, family.weight_for(e1), policy=policy)


class OperatorKind(enum.Enum):
    CRUDE = "crude"
    GENERAL = "general"
    SCA = "sca"
    SCC = "scc"
    SONC = "sonc"


@dataclass(frozen=True)
class StandardizationSpec:
    """Declarative description of one operator column.

    kind             which operator to run
    weight           SCA: measure over A; GENERAL: measure over the weighted
                     covariates; SCC: optional joint measure used instead of
                     a standard distribution
    standard_period  SCC: period whose distribution supplies conditionals;
                     the caller resolves it to an EmpiricalJoint at apply
                     time (the string "self" means the analyzed period)
    family           SONC: the weight family
    """

    kind: OperatorKind
    weight: WeightMeasure | None = None
    standard_period: str | None = None
    family: SoncFamily | None = None

    def __post_init__(self):
        k = self.kind
        if k in (OperatorKind.SCA, OperatorKind.GENERAL) and self.weight is None:
            raise SchemaError(f"{k.value} requires a weight measure")
        if k is OperatorKind.SCC and self.weight is None and self.standard_period is None:
            raise SchemaError("scc requires a standard period or a weight measure")
        if k is OperatorKind.SONC and self.family is None:
            raise SchemaError("sonc requires a weight family")

    def apply(
        self,
        dist: EmpiricalJoint,
        e1: StratumKey,
        *,
        standard: EmpiricalJoint | None = None,
        policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
    ) -> OpResult:
        if self.kind is OperatorKind.CRUDE:
            return crude(dist, e1, policy=policy)
        if self.kind is OperatorKind.GENERAL:
            return standardize_general(dist, e1, self.weight, policy=policy)
        if self.kind is OperatorKind.SCA:
            return sca(dist, e1, self.weight, policy=policy)
        if self.kind is OperatorKind.SCC:
            if self.weight is not None:
                return scc(dist, e1, self.weight, policy=policy)
            if standard is None:
                raise SchemaError(
                    f"scc column needs the distribution for period "
                    f"{self.standard_period!r}"
                )
            return scc(dist, e1, standard, policy=policy)
        if self.kind is OperatorKind.SONC:
            return sonc_apply(dist, e1, self.family, policy=policy)
        raise AssertionError(f"unhandled kind {self.kind}")


@dataclass(frozen=True)
class RateTable:
    """Operator results for every grouping stratum of one period, with one
    named column per operator. Strata run over the full schema cross
    product so emitted tables always have the same shape."""

    period: str
    schema: CovariateSchema
    e1_names: tuple[str, ...]
    columns: tuple[str, ...]
    entries: Mapping[StratumKey, Mapping[str, OpResult]] = field(repr=False)

    def rows(self) -> list[tuple[StratumKey, Mapping[str, OpResult]]]:
        return sorted(self.entries.items(), key=lambda kv: self.schema.sort_index(kv[0]))

    def result(self, e1: StratumKey, column: str) -> OpResult:
        if column not in self.columns:
            raise KeyError(f"no column {column!r}; have {list(self.columns)}")
        return self.entries[e1][column]

    def rate(self, e1: StratumKey, column: str) -> float:
        return self.result(e1, column).rate


def rate_table(
    dist: EmpiricalJoint,
    e1_names: Iterable[str],
    specs: Sequence[tuple[str, StandardizationSpec]],
    *,
    standards: Mapping[str, EmpiricalJoint] | None = None,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> RateTable:
    """Evaluate each named operator at every grouping stratum.

    standards maps period names to distributions for scc columns; the name
    "self" always resolves to the analyzed distribution.
    """
    schema = dist.schema
    e1 = schema.ordered_names(e1_names)
    labels = [label for label, _ in specs]
    if len(set(labels)) != len(labels):
        raise SchemaError(f"duplicate column labels in {labels}")
    lookup = dict(standards or {})
    lookup.setdefault("self", dist)
    lookup.setdefault(dist.period, dist)

    entries: dict[StratumKey, dict[str, OpResult]] = {}
    for key in schema.strata(e1):
        row: dict[str, OpResult] = {}
        for label, op_spec in specs:
            standard = None
            if op_spec.kind is OperatorKind.SCC and op_spec.standard_period is not None:
                try:
                    standard = lookup[op_spec.standard_period]
                except KeyError:
                    raise SchemaError(
                        f"no distribution provided for standard period "
                        f"{op_spec.standard_period!r}"
                    ) from None
            row[label] = op_spec.apply(dist, key, standard=standard, policy=policy)
        entries[key] = row
    return RateTable(dist.period, schema, e1, tuple(labels), entries)
