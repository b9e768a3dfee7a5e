"""Standard weight measures over categorical strata.

A WeightMeasure is an exact probability measure on the cross-product of a
subset of the schema's risk factors. Masses are stored as Fractions and
always sum to exactly 1, so standardized rates built from them are exact
rationals until the final float conversion.

User-supplied float weights are accepted when they sum to 1 within a small
tolerance and are then renormalized exactly; weights from counts or from an
empirical distribution are exact from the start.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .distribution import EmpiricalJoint
from .errors import SchemaError, WeightError
from .schema import EMPTY_KEY, CovariateSchema, StratumKey

#: float totals farther than this from 1 are rejected instead of renormalized
NORMALIZATION_TOL = 1e-9


def exact_fraction(value) -> Fraction:
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise WeightError(f"cannot interpret weight value {value!r} as a number")


def _as_key(key, names: tuple[str, ...]) -> StratumKey:
    if isinstance(key, StratumKey):
        return key
    if isinstance(key, Mapping):
        return StratumKey(tuple(key.items()))
    # single-covariate convenience: bare level string
    if isinstance(key, str) and len(names) == 1:
        return StratumKey(((names[0], key),))
    raise WeightError(f"cannot interpret weight key {key!r} as a stratum")


@dataclass(frozen=True)
class WeightMeasure:
    """Exact probability measure over the strata of a covariate subset."""

    schema: CovariateSchema
    names: tuple[str, ...]
    mass: Mapping[StratumKey, Fraction]

    def __post_init__(self):
        ordered = self.schema.ordered_names(self.names)
        for name in self.names:
            if name not in self.schema.risk_factors:
                raise SchemaError(f"weight covariate {name!r} is not a risk factor")
        object.__setattr__(self, "names", ordered)
        name_set = set(ordered)
        cleaned: dict[StratumKey, Fraction] = {}
        for key, value in self.mass.items():
            if key.names != name_set:
                raise WeightError(
                    f"weight key {key} does not cover exactly {sorted(name_set)}"
                )
            self.schema.validate_key(key)
            frac = exact_fraction(value)
            if frac < 0:
                raise WeightError(f"negative weight {frac} at {key}")
            if frac > 0:
                cleaned[key] = frac
        total = sum(cleaned.values(), Fraction(0))
        if total != 1:
            raise WeightError(f"weights must sum to exactly 1, got {total}")
        object.__setattr__(self, "mass", cleaned)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_mapping(
        cls,
        schema: CovariateSchema,
        names: Iterable[str],
        mapping: Mapping,
        *,
        tol: float = NORMALIZATION_TOL,
    ) -> WeightMeasure:
        """Build from user-supplied weights, renormalizing exactly.

        The raw total must be within tol of 1; anything farther off is
        treated as a data error rather than silently rescaled.
        """
        ordered = schema.ordered_names(names)
        raw: dict[StratumKey, Fraction] = {}
        for key, value in mapping.items():
            skey = _as_key(key, ordered)
            if skey in raw:
                raise WeightError(f"duplicate weight key {skey}")
            frac = exact_fraction(value)
            if frac < 0:
                raise WeightError(f"negative weight {frac} at {skey}")
            raw[skey] = frac
        total = sum(raw.values(), Fraction(0))
        if total <= 0:
            raise WeightError("weights sum to zero")
        if abs(float(total) - 1.0) > tol:
            raise WeightError(f"weights sum to {float(total)}, outside 1 +/- {tol}")
        return cls(schema, ordered, {k: v / total for k, v in raw.items()})

    @classmethod
    def from_counts(
        cls, schema: CovariateSchema, names: Iterable[str], counts: Mapping
    ) -> WeightMeasure:
        """Build from non-negative integer masses (e.g. standard population
        sizes). Exact by construction."""
        ordered = schema.ordered_names(names)
        raw: dict[StratumKey, int] = {}
        for key, value in counts.items():
            skey = _as_key(key, ordered)
            if skey in raw:
                raise WeightError(f"duplicate weight key {skey}")
            if not isinstance(value, int) or isinstance(value, bool):
                raise WeightError(f"count at {skey} must be an integer, got {value!r}")
            if value < 0:
                raise WeightError(f"negative count {value} at {skey}")
            raw[skey] = value
        total = sum(raw.values())
        if total <= 0:
            raise WeightError("counts sum to zero")
        return cls(schema, ordered, {k: Fraction(v, total) for k, v in raw.items()})

    @classmethod
    def empirical(
        cls,
        dist: EmpiricalJoint,
        names: Iterable[str],
        given: StratumKey = EMPTY_KEY,
    ) -> WeightMeasure:
        """Population shares of a distribution over the given covariates,
        optionally restricted to a conditioning stratum."""
        ordered = dist.schema.ordered_names(names)
        if set(ordered) & given.names:
            raise SchemaError("weight covariates overlap the conditioning stratum")
        counts: dict[StratumKey, int] = {}
        for key, cell in dist.grouped(set(ordered) | given.names).items():
            if given.matches(key):
                counts[key.project(ordered)] = cell.total
        if not counts:
            raise WeightError(f"no individuals satisfy condition {given}")
        return cls.from_counts(dist.schema, ordered, counts)

    @classmethod
    def uniform(cls, schema: CovariateSchema, names: Iterable[str]) -> WeightMeasure:
        ordered = schema.ordered_names(names)
        keys = list(schema.strata(ordered))
        share = Fraction(1, len(keys))
        return cls(schema, ordered, {k: share for k in keys})

    @classmethod
    def point(cls, schema: CovariateSchema, key: StratumKey) -> WeightMeasure:
        """Degenerate measure concentrated on one stratum."""
        return cls(schema, tuple(sorted(key.names)), {key: Fraction(1)})

    # -- queries -----------------------------------------------------------

    def mass_of(self, key: StratumKey) -> Fraction:
        if key.names != set(self.names):
            raise WeightError(
                f"lookup key {key} does not cover exactly {list(self.names)}"
            )
        return self.mass.get(key, Fraction(0))

    def support(self) -> list[StratumKey]:
        return sorted(self.mass, key=self.schema.sort_index)

    def items(self) -> list[tuple[StratumKey, Fraction]]:
        return [(k, self.mass[k]) for k in self.support()]

    def as_float_dict(self) -> dict[StratumKey, float]:
        return {k: float(v) for k, v in self.items()}

    # -- derived measures ----------------------------------------------------

    def marginal(self, names: Iterable[str]) -> WeightMeasure:
        """Sum out every covariate not in names."""
        ordered = self.schema.ordered_names(names)
        missing = set(ordered) - set(self.names)
        if missing:
            raise SchemaError(f"measure does not cover {sorted(missing)}")
        out: dict[StratumKey, Fraction] = {}
        for key, frac in self.mass.items():
            sub = key.project(ordered)
            out[sub] = out.get(sub, Fraction(0)) + frac
        return WeightMeasure(self.schema, ordered, out)

    def condition(self, given: StratumKey) -> WeightMeasure:
        """Conditional measure over the remaining covariates given an
        assignment to some of this measure's covariates."""
        if not given.names <= set(self.names):
            raise SchemaError(
                f"conditioning covariates {sorted(given.names)} not all covered"
            )
        rest = tuple(n for n in self.names if n not in given.names)
        if not rest:
            raise SchemaError("conditioning on every covariate leaves nothing")
        restricted = {
            key.project(rest): frac
            for key, frac in self.mass.items()
            if given.matches(key)
        }
        total = sum(restricted.values(), Fraction(0))
        if total == 0:
            raise WeightError(f"conditioning event {given} has zero mass")
        return WeightMeasure(
            self.schema, rest, {k: v / total for k, v in restricted.items()}
        )

    def product(self, other: WeightMeasure) -> WeightMeasure:
        """Independent product with a measure over disjoint covariates."""
        if self.schema is not other.schema and self.schema != other.schema:
            raise SchemaError("measures live on different schemas")
        overlap = set(self.names) & set(other.names)
        if overlap:
            raise SchemaError(f"measures overlap on {sorted(overlap)}")
        out = {
            a.merge(b): fa * fb
            for (a, fa), (b, fb) in itertools.product(self.items(), other.items())
        }
        return WeightMeasure(self.schema, self.names + other.names, out)
