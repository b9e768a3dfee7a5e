"""Fundamental disease-probability models with one unmeasured covariate.

An FdpModel specifies, for a single period, the covariate distribution over
the measured strata E, the conditional distribution of an unmeasured
categorical covariate U within each stratum, and the disease probability in
each (E, U) cell. Mixing U out yields the exact stratum rates a registry
would record, so the model can generate synthetic registries whose
confounding structure is known to the last digit.

The falsification logic runs on marginal standardized rates: if two periods
share disease probabilities given (E, U) and share the conditional law of U
given E, their weighted marginal rates must coincide for every weight. A
nonzero difference therefore refutes at least one of those assumptions; a
zero difference confirms nothing, and data-only verdicts never claim it
does.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .diagnostics import TriState
from .distribution import CellCount, EmpiricalJoint
from .errors import ModelError
from .schema import CovariateSchema, StratumKey, valid_level
from .weights import WeightMeasure, exact_fraction

#: two-stage per-stratum sampler identity; recorded in generated metadata so
#: equal (generator, seed) always reproduces equal counts
GENERATOR_NAME = "pcg64-seedseq-v1"

#: conditional rows whose raw sum is farther than this from 1 are rejected
ROW_TOL = 1e-12


def _normalize_row(
    raw: Mapping[str, object], u_levels: tuple[str, ...], where: str
) -> dict[str, Fraction]:
    """Exact probability row over u_levels from possibly-float input."""
    row: dict[str, Fraction] = {}
    for u, value in raw.items():
        if u not in u_levels:
            raise ModelError(f"{where}: unknown u level {u!r}")
        frac = exact_fraction(value)
        if frac < 0:
            raise ModelError(f"{where}: negative probability {frac} at u={u}")
        row[u] = frac
    total = sum(row.values(), Fraction(0))
    if total <= 0:
        raise ModelError(f"{where}: row has no mass")
    if abs(float(total) - 1.0) > ROW_TOL:
        raise ModelError(f"{where}: row sums to {float(total)}, not 1")
    return {u: row.get(u, Fraction(0)) / total for u in u_levels}


@dataclass(frozen=True)
class FdpModel:
    """One period's full generative specification over (E, U, D)."""

    period: str
    schema: CovariateSchema
    u_levels: tuple[str, ...]
    cov_dist: WeightMeasure
    u_given_e: Mapping[StratumKey, Mapping[str, Fraction]]
    d_given_eu: Mapping[StratumKey, Mapping[str, Fraction]]

    def __post_init__(self):
        if not self.u_levels:
            raise ModelError("need at least one u level")
        if len(set(self.u_levels)) != len(self.u_levels):
            raise ModelError("duplicate u levels")
        for u in self.u_levels:
            if not valid_level(u):
                raise ModelError(f"u level {u!r} outside the level alphabet")
        if set(self.cov_dist.names) != set(self.schema.risk_factors):
            raise ModelError("covariate distribution must cover every risk factor")

        u_rows: dict[StratumKey, dict[str, Fraction]] = {}
        for key, raw in self.u_given_e.items():
            self.schema.validate_key(key)
            u_rows[key] = _normalize_row(raw, self.u_levels, f"u_given_e[{key}]")
        d_rows: dict[StratumKey, dict[str, Fraction]] = {}
        for key, raw in self.d_given_eu.items():
            self.schema.validate_key(key)
            row: dict[str, Fraction] = {}
            for u, value in raw.items():
                if u not in self.u_levels:
                    raise ModelError(f"d_given_eu[{key}]: unknown u level {u!r}")
                frac = exact_fraction(value)
                if not 0 <= frac <= 1:
                    raise ModelError(
                        f"d_given_eu[{key}]: probability {frac} outside [0,1]"
                    )
                row[u] = frac
            d_rows[key] = row
        for e in self.cov_dist.support():
            if e not in u_rows:
                raise ModelError(f"no u_given_e row for supported stratum {e}")
            for u, mass in u_rows[e].items():
                if mass > 0 and u not in d_rows.get(e, {}):
                    raise ModelError(
                        f"no d_given_eu entry for supported cell ({e}, u={u})"
                    )
        object.__setattr__(self, "u_given_e", u_rows)
        object.__setattr__(self, "d_given_eu", d_rows)

    def disease_rate(self, e: StratumKey) -> Fraction:
        """P(D | e): the u-mixture of the cell disease probabilities."""
        try:
            u_row = self.u_given_e[e]
        except KeyError:
            raise ModelError(f"model has no tables for stratum {e}") from None
        d_row = self.d_given_eu.get(e, {})
        acc = Fraction(0)
        for u, mass in u_row.items():
            if mass == 0:
                continue
            acc += mass * d_row[u]
        return acc


def fdp_marginalize(model: FdpModel) -> dict[StratumKey, Fraction]:
    """Exact registry-visible rates P(D | e) for every stratum the model
    specifies, in schema order."""
    keys = sorted(model.u_given_e, key=model.schema.sort_index)
    return {e: model.disease_rate(e) for e in keys}


class GenerationMode(enum.Enum):
    EXPECTED = "expected"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class GeneratedData:
    """A synthetic registry plus the exact quantities it was rounded or
    sampled from. expected_cases keeps the unrounded case counts so exact
    model-vs-data identities survive integer emission."""

    data: EmpiricalJoint
    mode: GenerationMode
    seed: int | None
    generator: str | None
    sizes: Mapping[StratumKey, int]
    model_rates: Mapping[StratumKey, Fraction]
    expected_cases: Mapping[StratumKey, Fraction]


def _resolve_sizes(
    model: FdpModel, population_sizes: Mapping[StratumKey, int] | int
) -> dict[StratumKey, int]:
    if isinstance(population_sizes, int):
        if population_sizes <= 0:
            raise ModelError(f"population size must be positive, got {population_sizes}")
        return {e: population_sizes for e in model.cov_dist.support()}
    sizes: dict[StratumKey, int] = {}
    for key, n in population_sizes.items():
        model.schema.validate_key(key)
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise ModelError(f"population size at {key} must be a non-negative integer")
        if key not in model.u_given_e:
            raise ModelError(f"model has no tables for sized stratum {key}")
        if n > 0:
            sizes[key] = n
    for e in model.cov_dist.support():
        if e not in sizes:
            raise ModelError(f"no population size for supported stratum {e}")
    return sizes


def fdp_generate(
    model: FdpModel,
    population_sizes: Mapping[StratumKey, int] | int,
    mode: GenerationMode = GenerationMode.EXPECTED,
    *,
    seed: int | None = None,
) -> GeneratedData:
    """Realize the model as an integer registry.

    EXPECTED rounds each stratum's exact expected case count to the nearest
    integer (ties to even) and records the exact value alongside. SAMPLED
    draws U then D per individual, using one deterministic sub-stream per
    stratum (in schema order) spawned from the seed, so counts are
    reproducible from (generator name, seed) alone.
    """
    sizes = _resolve_sizes(model, population_sizes)
    ordered = sorted(sizes, key=model.schema.sort_index)
    model_rates = {e: model.disease_rate(e) for e in ordered}
    expected = {e: sizes[e] * model_rates[e] for e in ordered}

    cells: dict[StratumKey, CellCount] = {}
    if mode is GenerationMode.EXPECTED:
        if seed is not None:
            raise ModelError("seed is meaningless in expected mode")
        for e in ordered:
            cells[e] = CellCount(round(expected[e]), sizes[e])
        gen_name = None
    elif mode is GenerationMode.SAMPLED:
        if seed is None:
            raise ModelError("sampled mode requires a seed")
        for i, e in enumerate(ordered):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            u_row = model.u_given_e[e]
            probs = np.array([float(u_row[u]) for u in model.u_levels])
            probs /= probs.sum()
            u_counts = rng.multinomial(sizes[e], probs)
            cases = 0
            for u, n_u in zip(model.u_levels, u_counts):
                if n_u == 0:
                    continue
                d = model.d_given_eu.get(e, {}).get(u)
                if d is None:
                    raise ModelError(
                        f"sampled u={u} in stratum {e} has no disease probability"
                    )
                cases += int(rng.binomial(int(n_u), float(d)))
            cells[e] = CellCount(cases, sizes[e])
        gen_name = GENERATOR_NAME
    else:
        raise ModelError(f"unknown generation mode {mode!r}")

    data = EmpiricalJoint(model.period, model.schema, cells)
    return GeneratedData(data, mode, seed, gen_name, dict(sizes), model_rates, expected)


def scc_marginal(model: FdpModel, weight: WeightMeasure) -> Fraction:
    """Marginal standardized rate of the model: the weight-average of the
    registry-visible stratum rates, exactly."""
    if weight.schema != model.schema or set(weight.names) != set(
        model.schema.risk_factors
    ):
        raise ModelError("weight must cover every risk factor of the model schema")
    acc = Fraction(0)
    for e, mass in weight.items():
        if e not in model.u_given_e:
            raise ModelError(f"weight puts mass on unmodeled stratum {e}")
        acc += mass * model.disease_rate(e)
    return acc


class Inference(enum.Enum):
    NO_FALSIFICATION = "NO_FALSIFICATION"
    IDP_OR_CC_FALSE = "IDP_OR_CC_FALSE"


@dataclass(frozen=True)
class AssumptionVerdict:
    """Outcome of the marginal-rate falsification test.

    idp_holds decides whether disease probabilities given (E, U) are the
    same in both periods; cc_holds whether the law of U given E is. In data
    mode both stay UNKNOWN: a nonzero difference refutes the conjunction,
    a zero difference confirms nothing.
    """

    inference: Inference
    difference: Fraction
    tol: Fraction
    idp_holds: TriState = TriState.UNKNOWN
    cc_holds: TriState = TriState.UNKNOWN
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        refuted = abs(self.difference) > self.tol
        if refuted != (self.inference is Inference.IDP_OR_CC_FALSE):
            raise ValueError("inference must mirror |difference| > tol")


def _tables_agree(
    rows_a: Mapping[StratumKey, Mapping[str, Fraction]],
    rows_b: Mapping[StratumKey, Mapping[str, Fraction]],
    relevant: Iterable[tuple[StratumKey, str]],
) -> tuple[bool, str | None]:
    for e, u in relevant:
        va = rows_a.get(e, {}).get(u)
        vb = rows_b.get(e, {}).get(u)
        if va is None or vb is None:
            return False, f"({e}, u={u}) specified on one side only"
        if va != vb:
            return False, f"({e}, u={u}): {va} vs {vb}"
    return True, None


def falsify(
    model_a: FdpModel,
    model_b: FdpModel,
    weight: WeightMeasure,
    tol=0,
) -> AssumptionVerdict:
    """Model-mode falsification: compute the exact marginal-rate difference
    and, since the tables are known, also decide each assumption directly.

    The direct decisions must be consistent with the disjunction: a nonzero
    difference with both assumptions intact is arithmetically impossible.
    """
    if model_a.schema != model_b.schema or model_a.u_levels != model_b.u_levels:
        raise ModelError("models must share schema and u levels")
    tol_f = Fraction(tol)
    diff = scc_marginal(model_a, weight) - scc_marginal(model_b, weight)
    refuted = abs(diff) > tol_f

    strata = sorted(
        set(model_a.u_given_e) | set(model_b.u_given_e),
        key=model_a.schema.sort_index,
    )
    cells = [(e, u) for e in strata for u in model_a.u_levels]
    # disease probabilities only matter where some period can reach the cell
    reachable = [
        (e, u)
        for e, u in cells
        if model_a.u_given_e.get(e, {}).get(u, Fraction(0)) > 0
        or model_b.u_given_e.get(e, {}).get(u, Fraction(0)) > 0
    ]
    idp_ok, idp_note = _tables_agree(model_a.d_given_eu, model_b.d_given_eu, reachable)
    cc_ok, cc_note = _tables_agree(model_a.u_given_e, model_b.u_given_e, cells)

    notes = []
    if idp_note:
        notes.append(f"disease probabilities differ at {idp_note}")
    if cc_note:
        notes.append(f"u mixing differs at {cc_note}")
    if refuted and idp_ok and cc_ok:
        raise ModelError(
            "marginal rates differ although both assumptions hold; "
            "model tables are inconsistent"
        )
    if not refuted and not (idp_ok and cc_ok):
        notes.append(
            "assumption failures cancel in this weighting; the marginal test "
            "cannot see them"
        )
    return AssumptionVerdict(
        Inference.IDP_OR_CC_FALSE if refuted else Inference.NO_FALSIFICATION,
        diff,
        tol_f,
        TriState.from_bool(idp_ok),
        TriState.from_bool(cc_ok),
        tuple(notes),
    )


def falsify_from_data(
    data_a: EmpiricalJoint,
    data_b: EmpiricalJoint,
    weight: WeightMeasure,
    tol,
) -> AssumptionVerdict:
    """Data-mode falsification: only the marginal-rate difference is
    observable, so the individual assumptions stay UNKNOWN either way.

    tol has no safe default here: sampled registries differ by noise alone,
    and the caller must say how much difference is ignorable.
    """
    tol_f = Fraction(tol)
    acc_a = Fraction(0)
    acc_b = Fraction(0)
    for e, mass in weight.items():
        acc_a += mass * data_a.crude_fraction(e)
        acc_b += mass * data_b.crude_fraction(e)
    diff = acc_a - acc_b
    refuted = abs(diff) > tol_f
    note = (
        "marginal standardized rates differ: disease probabilities given the "
        "full covariates (measured and unmeasured) and the unmeasured mixing "
        "cannot both be stable"
        if refuted
        else "no falsification: the assumptions may still be false in ways "
        "this weighting cannot see"
    )
    return AssumptionVerdict(
        Inference.IDP_OR_CC_FALSE if refuted else Inference.NO_FALSIFICATION,
        diff,
        tol_f,
        notes=(note,),
    )
