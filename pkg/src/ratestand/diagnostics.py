"""Confounding diagnostics for standardized-rate comparisons.

Each check decides an exact distributional identity between two periods (or
between a dataset and a standard): whether the mixing weights that crude or
standardized rates average over stayed the same. When the relevant identity
holds, rate differences between the periods are carried by the outcome
conditionals alone; when it fails, part of any rate difference is an
artifact of shifted weights.

Comparisons run on exact rational conditionals. The default tolerance is 0
because empirical conditionals are ratios of integers; a nonzero tolerance
turns a check into a near-equality screen.
"""

from __future__ import annotations

import enum
import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction

from .distribution import EmpiricalJoint
from .errors import SchemaError, UndefinedRateError
from .operators import EmptyStratumPolicy, sca, scc
from .schema import CovariateSchema, Factorization, StratumKey
from .weights import WeightMeasure


class TriState(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @classmethod
    def from_bool(cls, flag: bool) -> TriState:
        return cls.TRUE if flag else cls.FALSE


class ConfoundingCondition(enum.Enum):
    """Which distributional identity a verdict decided.

    CRUDE_WEIGHTS_STABLE      the outside-covariate mix within each grouping
                              stratum is the same in both periods, so crude
                              rate differences are unconfounded
    SCA_WEIGHTS_STABLE        within each standardized-covariate slice of
                              each reduced grouping stratum, the residual
                              covariate mix is the same in both periods
    SCA_WEIGHTS_STABLE_EVERYWHERE
                              the residual mix given the standardized
                              covariates alone is the same in both periods;
                              implies SCA_WEIGHTS_STABLE for every grouping
    SCA_SCC_AGREE             the standard's residual profile matches the
                              data and the data's residual profile does not
                              depend on the standardized covariates, which
                              forces single-covariate and complete
                              standardization to coincide
    """

    CRUDE_WEIGHTS_STABLE = "crude-weights-stable"
    SCA_WEIGHTS_STABLE = "sca-weights-stable"
    SCA_WEIGHTS_STABLE_EVERYWHERE = "sca-weights-stable-everywhere"
    SCA_SCC_AGREE = "sca-scc-agree"


@dataclass(frozen=True)
class Witness:
    """Location and values of the worst disagreement found by a check.

    kind is "discrepancy" for a compared cell, or "support-mismatch" for a
    conditioning stratum populated on only one side (its values are the two
    population totals instead of conditional probabilities).
    """

    stratum: StratumKey
    value_a: Fraction
    value_b: Fraction
    kind: str = "discrepancy"


@dataclass(frozen=True)
class ConfoundingVerdict:
    condition: ConfoundingCondition
    holds: bool
    max_discrepancy: Fraction
    witness: Witness | None
    tol: Fraction
    compared: int
    undefined_strata: tuple[StratumKey, ...] = ()
    notes: tuple[str, ...] = ()
    corroboration: Fraction | None = None

    def __post_init__(self):
        if self.holds != (self.max_discrepancy <= self.tol):
            raise ValueError("holds must mirror max_discrepancy <= tol")
        if not self.holds and self.witness is None:
            raise ValueError("failed verdicts must carry a witness")


def _tol_fraction(tol) -> Fraction:
    frac = Fraction(tol)
    if frac < 0:
        raise ValueError(f"tolerance must be non-negative, got {tol}")
    return frac


def _conditional_cells(
    dist: EmpiricalJoint, targets: list[StratumKey], given: StratumKey
) -> dict[StratumKey, Fraction] | None:
    """P(target | given) over the full target cross product, or None when
    the conditioning stratum is empty."""
    _, denom = dist.count(given)
    if denom == 0:
        return None
    out = {}
    for t in targets:
        _, numer = dist.count(t.merge(given))
        out[t] = Fraction(numer, denom)
    return out


def _compare_conditionals(
    dist_a: EmpiricalJoint,
    dist_b: EmpiricalJoint,
    given_names: tuple[str, ...],
    target_names: tuple[str, ...],
    condition: ConfoundingCondition,
    tol: Fraction,
) -> ConfoundingVerdict:
    schema = dist_a.schema
    if dist_b.schema != schema:
        raise SchemaError("distributions use different schemas")
    if not target_names:
        return ConfoundingVerdict(condition, True, Fraction(0), None, tol, 0,
                                  notes=("vacuous: nothing to average over",))

    targets = list(schema.strata(target_names))
    max_disc = Fraction(0)
    witness: Witness | None = None
    compared = 0
    mismatched: list[StratumKey] = []
    mismatch_witness: Witness | None = None

    for given in schema.strata(given_names):
        cond_a = _conditional_cells(dist_a, targets, given)
        cond_b = _conditional_cells(dist_b, targets, given)
        if cond_a is None and cond_b is None:
            continue
        if cond_a is None or cond_b is None:
            mismatched.append(given)
            if mismatch_witness is None:
                mismatch_witness = Witness(
                    given,
                    Fraction(dist_a.count(given).total),
                    Fraction(dist_b.count(given).total),
                    kind="support-mismatch",
                )
            continue
        for t in targets:
            compared += 1
            diff = abs(cond_a[t] - cond_b[t])
            if diff > max_disc:
                max_disc = diff
                witness = Witness(t.merge(given), cond_a[t], cond_b[t])

    notes: tuple[str, ...] = ()
    if mismatched:
        # a conditional that exists on one side only cannot be equal on
        # both, so a support mismatch counts as maximal discrepancy
        max_disc = max(max_disc, Fraction(1))
        witness = witness if max_disc > 1 else mismatch_witness or witness
        notes = (f"{len(mismatched)} conditioning strata populated on one side only",)
    holds = max_disc <= tol
    return ConfoundingVerdict(
        condition, holds, max_disc, None if holds else witness, tol, compared,
        undefined_strata=tuple(mismatched), notes=notes,
    )


def check_crude_unconfounded(
    dist_a: EmpiricalJoint,
    dist_b: EmpiricalJoint,
    factorization: Factorization,
    *,
    e2_names: Iterable[str] | None = None,
    tol=0,
) -> ConfoundingVerdict:
    """Are the crude rates' mixing weights the same in both periods?

    Compares the conditional distribution of the outside covariates given
    each grouping stratum across the two periods. e2_names restricts the
    comparison to a subset of the outside covariates: a shift can cancel in
    a marginal even while the full joint conditional moves, and the
    restricted check decides exactly that weaker marginal identity.
    """
    schema = dist_a.schema
    if e2_names is None:
        target = factorization.e2_names
    else:
        target = schema.ordered_names(e2_names)
        extra = set(target) - set(factorization.e2_names)
        if extra:
            raise SchemaError(
                f"{sorted(extra)} are not outside covariates of this factorization"
            )
    return _compare_conditionals(
        dist_a, dist_b, factorization.e1_names, target,
        ConfoundingCondition.CRUDE_WEIGHTS_STABLE, _tol_fraction(tol),
    )


def check_sca_unconfounded(
    dist_a: EmpiricalJoint,
    dist_b: EmpiricalJoint,
    factorization: Factorization,
    a_names: Iterable[str],
    *,
    tol=0,
) -> ConfoundingVerdict:
    """Are the weights behind single-covariate standardized rates the same
    in both periods, for this grouping?

    SCA averages slice rates whose own inner weights are the residual mix
    given (reduced grouping stratum, standardized level); this compares
    those residual conditionals across periods. A pair can pass the crude
    check yet fail here, which is exactly how standardization can introduce
    confounding that the crude rates did not have.
    """
    schema = dist_a.schema
    a = schema.ordered_names(a_names)
    if not a:
        raise SchemaError("need at least one standardized covariate")
    for name in a:
        if name not in schema.risk_factors:
            raise SchemaError(f"{name!r} is not a risk factor")
    a_set = set(a)
    e1a = tuple(n for n in factorization.e1_names if n not in a_set)
    e2a = tuple(n for n in factorization.e2_names if n not in a_set)
    given = schema.ordered_names(set(e1a) | a_set)
    return _compare_conditionals(
        dist_a, dist_b, given, e2a,
        ConfoundingCondition.SCA_WEIGHTS_STABLE, _tol_fraction(tol),
    )


def check_sca_unconfounded_everywhere(
    dist_a: EmpiricalJoint,
    dist_b: EmpiricalJoint,
    a_names: Iterable[str],
    *,
    tol=0,
) -> ConfoundingVerdict:
    """Is the residual covariate mix given the standardized covariates the
    same in both periods?

    This is the grouping-free version of check_sca_unconfounded: if it
    holds, the per-grouping check holds for every factorization at once,
    and the two periods can differ at most in the standardized covariates'
    own marginal.
    """
    schema = dist_a.schema
    a = schema.ordered_names(a_names)
    if not a:
        raise SchemaError("need at least one standardized covariate")
    rest = tuple(n for n in schema.risk_factors if n not in set(a))
    return _compare_conditionals(
        dist_a, dist_b, a, rest,
        ConfoundingCondition.SCA_WEIGHTS_STABLE_EVERYWHERE, _tol_fraction(tol),
    )


def _standard_conditional(
    standard: EmpiricalJoint | WeightMeasure,
    targets: list[StratumKey],
    given: StratumKey,
) -> dict[StratumKey, Fraction] | None:
    if isinstance(standard, EmpiricalJoint):
        return _conditional_cells(standard, targets, given)
    restricted = {
        key: frac for key, frac in standard.mass.items() if given.matches(key)
    }
    total = sum(restricted.values(), Fraction(0))
    if total == 0:
        return None
    rest = tuple(n for n in standard.names if n not in given.names)
    out = {t: Fraction(0) for t in targets}
    for key, frac in restricted.items():
        out[key.project(rest)] += frac / total
    return out


def check_sca_scc_agreement(
    dist: EmpiricalJoint,
    standard: EmpiricalJoint | WeightMeasure,
    a_names: Iterable[str],
    *,
    tol=0,
    corroborate: bool = True,
) -> ConfoundingVerdict:
    """Do single-covariate and complete standardization against this
    standard coincide on this dataset?

    Two identities are decided: (a) the standard's conditional residual
    profile given each standardized level matches the data's, and (b) the
    data's residual profile does not depend on the standardized level. When
    both hold, sca with the standard's marginal equals scc with the full
    standard at every grouping stratum of every standardized-covariate-free
    grouping, and the realized max |sca - scc| over all of them is reported
    as corroboration.
    """
    schema = dist.schema
    tol_f = _tol_fraction(tol)
    a = schema.ordered_names(a_names)
    if not a:
        raise SchemaError("need at least one standardized covariate")
    if standard.schema != schema:
        raise SchemaError("standard and distribution use different schemas")
    if isinstance(standard, WeightMeasure) and set(standard.names) != set(
        schema.risk_factors
    ):
        raise SchemaError("standard weight must cover every risk factor")
    rest = tuple(n for n in schema.risk_factors if n not in set(a))
    targets = list(schema.strata(rest))

    max_disc = Fraction(0)
    witness: Witness | None = None
    compared = 0
    mismatched: list[StratumKey] = []
    notes: list[str] = []

    marginal = _conditional_cells(dist, targets, StratumKey(()))
    if marginal is None:
        raise UndefinedRateError("distribution has no individuals")

    for a_key in schema.strata(a):
        data_cond = _conditional_cells(dist, targets, a_key)
        std_cond = _standard_conditional(standard, targets, a_key)
        if data_cond is None and std_cond is None:
            continue
        if data_cond is None or std_cond is None:
            mismatched.append(a_key)
            continue
        for t in targets:
            compared += 2
            for other, label in ((std_cond[t], "standard vs data"),
                                 (marginal[t], "data vs own marginal")):
                diff = abs(data_cond[t] - other)
                if diff > max_disc:
                    max_disc = diff
                    witness = Witness(t.merge(a_key), data_cond[t], other)
                    notes = [f"worst disagreement from {label} residual profile"]

    if mismatched:
        max_disc = max(max_disc, Fraction(1))
        if witness is None:
            m = mismatched[0]
            if isinstance(standard, EmpiricalJoint):
                std_mass = Fraction(standard.count(m).total)
            else:
                std_mass = sum(
                    (f for k, f in standard.mass.items() if m.matches(k)),
                    Fraction(0),
                )
            witness = Witness(m, Fraction(dist.count(m).total), std_mass,
                              kind="support-mismatch")
        notes.append(
            f"{len(mismatched)} standardized levels populated on one side only"
        )
    holds = max_disc <= tol_f

    corroboration = None
    if holds and corroborate:
        if isinstance(standard, EmpiricalJoint):
            a_weight = WeightMeasure.empirical(standard, a)
        else:
            a_weight = standard.marginal(a)
        corroboration = Fraction(0)
        for r in range(len(rest) + 1):
            for e1 in itertools.combinations(rest, r):
                for e1_key in schema.strata(e1):
                    try:
                        s = sca(dist, e1_key, a_weight)
                        c = scc(dist, e1_key, standard)
                    except UndefinedRateError:
                        continue
                    gap = abs(s.value - c.value)
                    if gap > corroboration:
                        corroboration = gap
        notes.append("corroborated over every standardized-covariate-free grouping")

    return ConfoundingVerdict(
        ConfoundingCondition.SCA_SCC_AGREE, holds, max_disc,
        None if holds else witness, tol_f, compared,
        undefined_strata=tuple(mismatched), notes=tuple(notes),
        corroboration=corroboration,
    )


def percent_diff_fraction(standardized, crude) -> Fraction:
    """|standardized - crude| / standardized, in percent, exactly."""
    s = Fraction(standardized)
    c = Fraction(crude)
    if s <= 0:
        raise UndefinedRateError(
            f"percent difference needs a positive standardized rate, got {standardized}"
        )
    if c < 0:
        raise ValueError(f"crude rate cannot be negative, got {crude}")
    return abs(s - c) / s * 100


def percent_diff(standardized, crude) -> float:
    """Relative distortion of a crude rate against its standardized value,
    as a non-negative percentage of the standardized rate."""
    return float(percent_diff_fraction(standardized, crude))


@dataclass(frozen=True)
class ConfoundingDemo:
    """End-to-end comparison of two periods under three operators.

    For each grouping stratum: the between-period difference of crude, of
    complete-standardized, and of single-covariate-standardized rates, plus
    the weight-stability verdicts that say which differences to trust. A
    None difference means the rate was undefined on at least one side.
    """

    e1_names: tuple[str, ...]
    a_names: tuple[str, ...]
    crude_diff: Mapping[StratumKey, Fraction | None]
    scc_diff: Mapping[StratumKey, Fraction | None]
    sca_diff: Mapping[StratumKey, Fraction | None]
    crude_check: ConfoundingVerdict
    sca_check: ConfoundingVerdict
    notes: tuple[str, ...]

    def max_abs(self, diffs: Mapping[StratumKey, Fraction | None]) -> Fraction:
        vals = [abs(v) for v in diffs.values() if v is not None]
        return max(vals, default=Fraction(0))


def _diff_map(schema, e1_names, evaluate) -> dict[StratumKey, Fraction | None]:
    out: dict[StratumKey, Fraction | None] = {}
    for key in schema.strata(e1_names):
        try:
            a_val = evaluate(0, key)
            b_val = evaluate(1, key)
        except UndefinedRateError:
            out[key] = None
            continue
        out[key] = b_val - a_val
    return out


def confounding_demo(
    dist_a: EmpiricalJoint,
    dist_b: EmpiricalJoint,
    factorization: Factorization,
    a_names: Iterable[str],
    standard: EmpiricalJoint | WeightMeasure,
    *,
    tol=0,
) -> ConfoundingDemo:
    """Show, on one period pair, how standardization can manufacture
    confounded differences.

    In the intended regime the crude mixing weights are stable (so crude
    differences are clean and complete standardization against either
    period's own weights reproduces them exactly) while the single-covariate
    weights are not (so SCA differences diverge). If the inputs are not in
    that regime the notes say which side failed instead.
    """
    schema = dist_a.schema
    if dist_b.schema != schema:
        raise SchemaError("distributions use different schemas")
    a = schema.ordered_names(a_names)
    dists = (dist_a, dist_b)

    crude_check = check_crude_unconfounded(dist_a, dist_b, factorization, tol=tol)
    sca_check = check_sca_unconfounded(dist_a, dist_b, factorization, a, tol=tol)

    if isinstance(standard, EmpiricalJoint):
        a_weight = WeightMeasure.empirical(standard, a)
    else:
        a_weight = standard.marginal(a)

    e1 = factorization.e1_names
    crude_diff = _diff_map(schema, e1,
                           lambda i, k: dists[i].crude_fraction(k))
    scc_diff = _diff_map(schema, e1,
                         lambda i, k: scc(dists[i], k, standard).value)
    sca_diff = _diff_map(schema, e1,
                         lambda i, k: sca(dists[i], k, a_weight).value)

    notes = []
    if crude_check.holds:
        notes.append("crude mixing weights stable: crude differences are unconfounded")
    else:
        notes.append("crude-weights check failed: crude differences are themselves confounded")
    if sca_check.holds:
        notes.append("sca weights stable: single-covariate differences are unconfounded here")
    else:
        notes.append("sca-weights check failed: single-covariate differences are confounded")
    return ConfoundingDemo(
        e1, a, crude_diff, scc_diff, sca_diff, crude_check, sca_check, tuple(notes)
    )
