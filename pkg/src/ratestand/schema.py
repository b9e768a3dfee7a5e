"""Categorical covariate schemas, stratum keys, and factorizations.

A schema declares the categorical columns of a registry extract, the ordered
level set of each column, and which columns are the measured risk factors.
All distributions, weights, and operators in this package are defined over
the risk-factor cross-product of one shared schema; a stratum key names one
cell (or marginal slice) of that cross-product.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass

from .errors import SchemaError

# Levels are restricted to this alphabet so emitted CSV never needs quoting.
_LEVEL_RE = re.compile(r"^[A-Za-z0-9_-]+$")


def valid_level(text: str) -> bool:
    """True when text can appear as a level or period token in files."""
    return bool(_LEVEL_RE.match(text))


@dataclass(frozen=True)
class StratumKey:
    """An assignment of one level to each covariate in some subset.

    Keys are canonical (items sorted by covariate name), hashable, and
    independent of any schema; validation against a schema happens at the
    point of use.
    """

    items: tuple[tuple[str, str], ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.items))
        names = [name for name, _ in ordered]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate covariate in stratum key: {names}")
        object.__setattr__(self, "items", ordered)

    @classmethod
    def of(cls, assignment: Mapping[str, str] | None = None, **kwargs: str) -> StratumKey:
        merged = dict(assignment or {})
        merged.update(kwargs)
        return cls(tuple(merged.items()))

    @property
    def names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.items)

    def get(self, name: str) -> str:
        for key_name, level in self.items:
            if key_name == name:
                return level
        raise KeyError(name)

    def as_dict(self) -> dict[str, str]:
        return dict(self.items)

    def project(self, names: Iterable[str]) -> StratumKey:
        """Restrict the key to the given covariates (which must be present)."""
        wanted = set(names)
        missing = wanted - self.names
        if missing:
            raise SchemaError(f"key {self.as_dict()} lacks covariates {sorted(missing)}")
        return StratumKey(tuple((n, v) for n, v in self.items if n in wanted))

    def merge(self, other: StratumKey) -> StratumKey:
        """Union of two keys over disjoint covariate sets."""
        overlap = self.names & other.names
        if overlap:
            raise SchemaError(f"keys overlap on {sorted(overlap)}")
        return StratumKey(self.items + other.items)

    def matches(self, full_key: StratumKey) -> bool:
        """True when this (partial) key agrees with ``full_key`` everywhere."""
        full = full_key.as_dict()
        return all(full.get(n) == v for n, v in self.items)

    def __str__(self) -> str:
        if not self.items:
            return "(overall)"
        return ",".join(f"{n}={v}" for n, v in self.items)


EMPTY_KEY = StratumKey(())


@dataclass(frozen=True)
class CovariateSchema:
    """Named categorical columns, their ordered levels, and the risk-factor
    subset that operators act on.

    The same schema object must be shared by every period being compared;
    the support of the risk-factor cross-product is period-invariant by
    construction.
    """

    columns: tuple[tuple[str, tuple[str, ...]], ...]
    risk_factors: tuple[str, ...]

    def __post_init__(self):
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        for name, levels in self.columns:
            if not levels:
                raise SchemaError(f"column {name!r} has an empty level set")
            if len(set(levels)) != len(levels):
                raise SchemaError(f"column {name!r} has duplicate levels")
            for level in levels:
                if not _LEVEL_RE.match(level):
                    raise SchemaError(
                        f"level {level!r} of column {name!r} is outside the "
                        "allowed alphabet [A-Za-z0-9_-]"
                    )
        if not self.risk_factors:
            raise SchemaError("risk_factors must be non-empty")
        unknown = set(self.risk_factors) - set(names)
        if unknown:
            raise SchemaError(f"risk factors not in schema columns: {sorted(unknown)}")
        if len(set(self.risk_factors)) != len(self.risk_factors):
            raise SchemaError("duplicate risk factor names")
        # Canonical risk-factor order follows column order.
        ordered = tuple(n for n in names if n in set(self.risk_factors))
        object.__setattr__(self, "risk_factors", ordered)

    @classmethod
    def of(
        cls,
        columns: Mapping[str, Iterable[str]] | Iterable[tuple[str, Iterable[str]]],
        risk_factors: Iterable[str],
    ) -> CovariateSchema:
        if isinstance(columns, Mapping):
            pairs = columns.items()
        else:
            pairs = columns
        cols = tuple((name, tuple(levels)) for name, levels in pairs)
        return cls(cols, tuple(risk_factors))

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)

    def levels(self, name: str) -> tuple[str, ...]:
        for col_name, levels in self.columns:
            if col_name == name:
                return levels
        raise SchemaError(f"unknown column {name!r}")

    def has_column(self, name: str) -> bool:
        return any(col == name for col, _ in self.columns)

    def validate_key(self, key: StratumKey, within: Iterable[str] | None = None) -> None:
        """Check every (name, level) pair against the schema; ``within``
        additionally restricts the allowed covariate names."""
        allowed = set(within) if within is not None else set(self.column_names)
        for name, level in key.items:
            if name not in allowed:
                raise SchemaError(f"covariate {name!r} not allowed here (allowed: {sorted(allowed)})")
            if level not in self.levels(name):
                raise SchemaError(f"level {level!r} is not a level of column {name!r}")

    def ordered_names(self, names: Iterable[str]) -> tuple[str, ...]:
        """The given covariate names, re-ordered to schema column order."""
        wanted = set(names)
        unknown = wanted - set(self.column_names)
        if unknown:
            raise SchemaError(f"unknown columns: {sorted(unknown)}")
        return tuple(n for n in self.column_names if n in wanted)

    def strata(self, names: Iterable[str]) -> Iterator[StratumKey]:
        """All stratum keys over ``names``, in schema order (first column
        slowest). An empty name set yields the single empty key."""
        ordered = self.ordered_names(names)
        level_sets = [self.levels(n) for n in ordered]
        for combo in itertools.product(*level_sets):
            yield StratumKey(tuple(zip(ordered, combo)))

    def sort_index(self, key: StratumKey) -> tuple[int, ...]:
        """Deterministic sort position of a key: level indices in schema
        column order."""
        return tuple(
            self.levels(n).index(key.get(n)) for n in self.ordered_names(key.names)
        )

    def restrict(self, keep: Mapping[str, Iterable[str]]) -> CovariateSchema:
        """A new schema whose level sets are filtered to ``keep`` (cohort
        restriction, e.g. dropping young age bands). Level order is
        preserved; columns not named are untouched."""
        new_cols = []
        for name, levels in self.columns:
            if name in keep:
                wanted = set(keep[name])
                unknown = wanted - set(levels)
                if unknown:
                    raise SchemaError(
                        f"filter keeps unknown levels of {name!r}: {sorted(unknown)}"
                    )
                levels = tuple(lv for lv in levels if lv in wanted)
                if not levels:
                    raise SchemaError(f"filter on {name!r} keeps no levels")
            new_cols.append((name, levels))
        return CovariateSchema(tuple(new_cols), self.risk_factors)


@dataclass(frozen=True)
class Factorization:
    """A partition of the risk factors into a conditioning set E1 and its
    complement E2. E1 may be empty (marginal analysis)."""

    e1_names: tuple[str, ...]
    e2_names: tuple[str, ...]

    @classmethod
    def of(cls, schema: CovariateSchema, e1_names: Iterable[str]) -> Factorization:
        e1 = set(e1_names)
        unknown = e1 - set(schema.risk_factors)
        if unknown:
            raise SchemaError(f"factorization names are not risk factors: {sorted(unknown)}")
        e1_ordered = tuple(n for n in schema.risk_factors if n in e1)
        e2_ordered = tuple(n for n in schema.risk_factors if n not in e1)
        return cls(e1_ordered, e2_ordered)

    def __post_init__(self):
        if set(self.e1_names) & set(self.e2_names):
            raise SchemaError("factorization sets must be disjoint")

    @property
    def all_names(self) -> tuple[str, ...]:
        return self.e1_names + self.e2_names
