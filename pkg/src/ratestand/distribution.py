"""Empirical joint distributions of a binary outcome over categorical strata.

An EmpiricalJoint is an exact integer count table over the full risk-factor
cross-product for one period. Every probability in this package is a ratio
of these integers, so the mixture identity

    P(D|e1) = sum_e2 P(D|e1,e2) * P(e2|e1)

holds exactly in rational arithmetic and to the last bit after a single
float rounding.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .errors import IngestError, SchemaError, UndefinedRateError
from .schema import EMPTY_KEY, CovariateSchema, StratumKey


class CellCount(NamedTuple):
    cases: int
    total: int


@dataclass(frozen=True)
class EmpiricalJoint:
    """Exact case/population tallies per full risk-factor stratum for one
    period. Immutable; all queries are pure.

    Cells with zero population are never stored (an absent cell and an
    empty cell are the same thing).
    """

    period: str
    schema: CovariateSchema
    cells: Mapping[StratumKey, CellCount]

    def __post_init__(self):
        rf = set(self.schema.risk_factors)
        for key, count in self.cells.items():
            if key.names != rf:
                raise SchemaError(
                    f"cell key {key} does not cover exactly the risk factors "
                    f"{sorted(rf)}"
                )
            self.schema.validate_key(key)
            if count.total <= 0:
                raise SchemaError(f"stored cell {key} has non-positive total")
            if not 0 <= count.cases <= count.total:
                raise SchemaError(
                    f"cell {key}: cases {count.cases} outside [0, total={count.total}]"
                )
        object.__setattr__(self, "cells", dict(self.cells))

    # -- construction ------------------------------------------------------

    @classmethod
    def from_records(
        cls,
        records: Iterable[tuple[int | bool, Mapping[str, str]]],
        schema: CovariateSchema,
        period: str,
    ) -> EmpiricalJoint:
        """Tally microdata records of (case_flag, full risk-factor
        assignment). Record order is irrelevant. Columns outside the risk
        factors are accepted and dropped. Row indices in errors are
        1-based, matching data rows in delimited files."""
        rf = schema.risk_factors
        tallies: dict[StratumKey, list[int]] = {}
        for i, (flag, assignment) in enumerate(records, start=1):
            if flag not in (0, 1, True, False):
                raise IngestError(f"case flag must be 0/1, got {flag!r}", row_index=i)
            try:
                key = StratumKey(tuple((n, assignment[n]) for n in rf))
            except KeyError as exc:
                raise IngestError(f"missing column {exc.args[0]!r}", row_index=i) from None
            try:
                schema.validate_key(key)
            except SchemaError as exc:
                raise IngestError(str(exc), row_index=i) from None
            cell = tallies.setdefault(key, [0, 0])
            cell[0] += int(flag)
            cell[1] += 1
        return cls(period, schema, {k: CellCount(c, t) for k, (c, t) in tallies.items()})

    @classmethod
    def from_counts(
        cls,
        count_rows: Iterable[tuple[Mapping[str, str], int, int]],
        schema: CovariateSchema,
        period: str,
    ) -> EmpiricalJoint:
        """Build from pre-aggregated rows of (assignment, n_cases, n_total).

        Equivalent to from_records on the expanded microdata.
        """
        rf = schema.risk_factors
        cells: dict[StratumKey, CellCount] = {}
        for i, (assignment, cases, total) in enumerate(count_rows, start=1):
            try:
                key = StratumKey(tuple((n, assignment[n]) for n in rf))
            except KeyError as exc:
                raise IngestError(f"missing column {exc.args[0]!r}", row_index=i) from None
            try:
                schema.validate_key(key)
            except SchemaError as exc:
                raise IngestError(str(exc), row_index=i) from None
            if key in cells:
                raise IngestError(f"duplicate assignment {key}", row_index=i)
            if total < 0 or cases < 0:
                raise IngestError("counts must be non-negative", row_index=i)
            if cases > total:
                raise IngestError(f"n_cases {cases} > n_total {total}", row_index=i)
            if total > 0:
                cells[key] = CellCount(cases, total)
        return cls(period, schema, cells)

    # -- queries -----------------------------------------------------------

    @property
    def total_population(self) -> int:
        return sum(c.total for c in self.cells.values())

    @property
    def usable(self) -> bool:
        return self.total_population > 0

    def count(self, condition: StratumKey = EMPTY_KEY) -> CellCount:
        """Summed (cases, total) over all cells matching the condition.

        The condition may name any subset of the risk factors; the empty
        key selects everything.
        """
        self.schema.validate_key(condition, within=self.schema.risk_factors)
        cases = total = 0
        for key, cell in self.cells.items():
            if condition.matches(key):
                cases += cell.cases
                total += cell.total
        return CellCount(cases, total)

    def crude_rate(self, condition: StratumKey = EMPTY_KEY) -> float:
        """Observed disease frequency among individuals matching the
        condition. Raises UndefinedRateError when nobody matches."""
        return float(self.crude_fraction(condition))

    def crude_fraction(self, condition: StratumKey = EMPTY_KEY) -> Fraction:
        """crude_rate as an exact rational."""
        cases, total = self.count(condition)
        if total == 0:
            raise UndefinedRateError(
                f"no individuals satisfy condition {condition}", condition=condition
            )
        return Fraction(cases, total)

    def conditional_weight(self, e2: StratumKey, given: StratumKey) -> float:
        """Empirical P(e2 | given) as a population share."""
        return float(self.conditional_weight_fraction(e2, given))

    def conditional_weight_fraction(self, e2: StratumKey, given: StratumKey) -> Fraction:
        overlap = e2.names & given.names
        if overlap:
            raise SchemaError(f"conditioning sets overlap on {sorted(overlap)}")
        _, denom = self.count(given)
        if denom == 0:
            raise UndefinedRateError(
                f"no individuals satisfy condition {given}", condition=given
            )
        _, numer = self.count(e2.merge(given))
        return Fraction(numer, denom)

    def grouped(self, names: Iterable[str]) -> dict[StratumKey, CellCount]:
        """Tallies projected onto the given covariate subset, keyed by the
        projected stratum. Only non-empty groups appear."""
        ordered = self.schema.ordered_names(names)
        out: dict[StratumKey, list[int]] = {}
        for key, cell in self.cells.items():
            sub = key.project(ordered)
            agg = out.setdefault(sub, [0, 0])
            agg[0] += cell.cases
            agg[1] += cell.total
        return {k: CellCount(c, t) for k, (c, t) in out.items()}

    def rows(self) -> list[tuple[StratumKey, CellCount]]:
        """Cells in deterministic schema order."""
        return sorted(self.cells.items(), key=lambda kv: self.schema.sort_index(kv[0]))


def build_empirical(
    records: Iterable[tuple[int | bool, Mapping[str, str]]],
    schema: CovariateSchema,
    period: str,
) -> EmpiricalJoint:
    return EmpiricalJoint.from_records(records, schema, period)


def build_from_counts(
    count_rows: Iterable[tuple[Mapping[str, str], int, int]],
    schema: CovariateSchema,
    period: str,
) -> EmpiricalJoint:
    return EmpiricalJoint.from_counts(count_rows, schema, period)


def expand_to_records(dist: EmpiricalJoint) -> list[tuple[int, dict[str, str]]]:
    """Microdata equivalent of a count table (cases first within each cell)."""
    out: list[tuple[int, dict[str, str]]] = []
    for key, cell in dist.rows():
        assignment = key.as_dict()
        out.extend((1, dict(assignment)) for _ in range(cell.cases))
        out.extend((0, dict(assignment)) for _ in range(cell.total - cell.cases))
    return out
