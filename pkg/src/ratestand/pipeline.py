"""Batch pipelines: configuration, series assembly, and artifact emission.

A config file names a schema, the period datasets, the grouping and
standardization choices, and optional nesting and synthetic-model requests.
Each pipeline entry point loads what it needs, computes in exact
arithmetic, and emits byte-deterministic CSV/JSON (rates scaled per 100,000
at the last moment, undefined entries marked NA, never zero-filled),
with figures rendered beside the delimited files.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path

from . import figures
from .dataio import (
    FORMAT_VERSION,
    load_fdp_file,
    load_schema,
    read_count_csv,
    read_microdata_csv,
    read_weight_csv,
    schema_digest,
    check_format_version,
    write_count_csv,
    write_csv,
)
from .diagnostics import (
    ConfoundingVerdict,
    check_crude_unconfounded,
    check_sca_scc_agreement,
    check_sca_unconfounded,
    check_sca_unconfounded_everywhere,
    confounding_demo,
    percent_diff_fraction,
)
from .distribution import EmpiricalJoint
from .errors import ConfigError, UndefinedRateError
from .fdp import GenerationMode, falsify, falsify_from_data, fdp_generate
from .nesting import NestingPair, projection_checks, sca_pseudo_recurse, scc_recurse
from .operators import (
    EmptyStratumPolicy,
    OperatorKind,
    OpResult,
    StandardizationSpec,
    rate_table,
)
from .schema import CovariateSchema, Factorization, StratumKey
from .weights import WeightMeasure

RATE_SCALE = 100_000
RATE_DECIMALS = 6


@dataclass(frozen=True)
class DatasetRef:
    period: str
    path: Path
    format: str  # "counts" or "microdata"


@dataclass(frozen=True)
class FdpRequest:
    model_path: Path
    periods: tuple[str, ...]
    sizes: int | dict[StratumKey, int] | None
    mode: GenerationMode
    seed: int | None
    weight_kind: str  # "model_cov", "csv", "uniform"
    weight_period: str | None
    weight: WeightMeasure | None
    tol: Fraction | None


@dataclass(frozen=True)
class AnalysisConfig:
    base_dir: Path
    schema: CovariateSchema
    datasets: tuple[DatasetRef, ...]
    filters: Mapping[str, tuple[str, ...]]
    groups: tuple[str, ...]
    standardize_over: tuple[str, ...]
    standard_kind: str  # "period" or "weights"
    standard_period: str | None
    standard_joint: WeightMeasure | None
    nesting: NestingPair | None
    fdp: FdpRequest | None

    @property
    def effective_schema(self) -> CovariateSchema:
        if not self.filters:
            return self.schema
        return self.schema.restrict(self.filters)

    @property
    def periods(self) -> tuple[str, ...]:
        return tuple(sorted(d.period for d in self.datasets))


def _resolve_path(base: Path, value: str, where: str) -> Path:
    path = (base / value).resolve() if not Path(value).is_absolute() else Path(value)
    if not path.exists():
        raise ConfigError(f"{where}: file not found: {value}")
    return path


def load_config(source: str | Path) -> AnalysisConfig:
    path = Path(source)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    where = str(path)
    if "format_version" in obj:
        check_format_version(obj["format_version"], where)
    base = path.parent

    if "schema" not in obj:
        raise ConfigError(f"{where}: missing field 'schema'")
    schema_src = obj["schema"]
    if isinstance(schema_src, str):
        schema = load_schema(_resolve_path(base, schema_src, where))
    else:
        schema = load_schema(schema_src)

    raw_datasets = obj.get("datasets", [])
    if not raw_datasets:
        raise ConfigError(f"{where}: dataset list is empty")
    datasets = []
    seen_periods = set()
    for d in raw_datasets:
        try:
            period, rel, fmt = d["period"], d["path"], d.get("format", "counts")
        except (KeyError, TypeError):
            raise ConfigError(f"{where}: malformed dataset entry {d!r}") from None
        if fmt not in ("counts", "microdata"):
            raise ConfigError(f"{where}: unknown dataset format {fmt!r}")
        if period in seen_periods:
            raise ConfigError(f"{where}: duplicate period {period!r}")
        seen_periods.add(period)
        datasets.append(DatasetRef(str(period), _resolve_path(base, rel, where), fmt))

    filters = {}
    for name, levels in obj.get("filters", {}).items():
        if not schema.has_column(name):
            raise ConfigError(f"{where}: filter names unknown column {name!r}")
        filters[name] = tuple(str(v) for v in levels)

    analysis = obj.get("analysis", {})
    groups = tuple(str(g) for g in analysis.get("groups", ()))
    a_names = tuple(str(a) for a in analysis.get("standardize_over", ()))
    for name in (*groups, *a_names):
        if name not in schema.risk_factors:
            raise ConfigError(f"{where}: {name!r} is not a risk factor")

    std = analysis.get("standard", {})
    std_kind = std.get("type", "period")
    std_period = None
    std_joint = None
    if std_kind == "period":
        std_period = str(std.get("period", "")) or None
        if std_period is None and datasets:
            std_period = sorted(seen_periods)[-1]
        if std_period not in seen_periods:
            raise ConfigError(f"{where}: standard period {std_period!r} not in datasets")
    elif std_kind == "weights":
        if "joint" not in std:
            raise ConfigError(f"{where}: weights standard needs a 'joint' CSV path")
        std_joint = read_weight_csv(_resolve_path(base, std["joint"], where), schema)
        if set(std_joint.names) != set(schema.risk_factors):
            raise ConfigError(f"{where}: joint standard must cover every risk factor")
    else:
        raise ConfigError(f"{where}: unknown standard type {std_kind!r}")

    nesting = None
    if "nesting" in obj:
        block = obj["nesting"]
        try:
            nesting = NestingPair(
                tuple(str(n) for n in block["outer"]),
                tuple(str(n) for n in block["inner"]),
            )
        except (KeyError, TypeError):
            raise ConfigError(f"{where}: malformed nesting block") from None

    fdp = None
    if "fdp" in obj:
        block = obj["fdp"]
        if "model" not in block:
            raise ConfigError(f"{where}: fdp block needs a 'model' path")
        model_path = _resolve_path(base, block["model"], where)
        periods = tuple(str(p) for p in block.get("periods", ()))
        sizes = block.get("sizes")
        if isinstance(sizes, dict):
            rows = sizes.get("rows")
            if not isinstance(rows, list):
                raise ConfigError(
                    f"{where}: fdp.sizes must be an integer or {{'rows': [...]}}"
                )
            parsed = {}
            for row in rows:
                try:
                    key = StratumKey(
                        tuple((str(k), str(v)) for k, v in row["stratum"].items())
                    )
                    parsed[key] = int(row["n"])
                except (KeyError, TypeError, AttributeError, ValueError):
                    raise ConfigError(
                        f"{where}: malformed fdp.sizes row {row!r}"
                    ) from None
            sizes = parsed
        elif sizes is not None:
            sizes = int(sizes)
        mode = GenerationMode(block.get("mode", "expected"))
        seed = block.get("seed")
        if seed is not None:
            seed = int(seed)
        wblock = block.get("weight", {"type": "model_cov"})
        wkind = wblock.get("type", "model_cov")
        wperiod = wblock.get("period")
        weight = None
        if wkind == "csv":
            weight = read_weight_csv(_resolve_path(base, wblock["path"], where), schema)
        elif wkind not in ("model_cov", "uniform"):
            raise ConfigError(f"{where}: unknown fdp weight type {wkind!r}")
        tol = Fraction(str(block["tol"])) if "tol" in block else None
        fdp = FdpRequest(
            model_path, periods, sizes, mode, seed, wkind,
            str(wperiod) if wperiod is not None else None, weight, tol,
        )

    config = AnalysisConfig(
        base, schema, tuple(datasets), filters, groups, a_names,
        std_kind, std_period, std_joint, nesting, fdp,
    )
    # force filter validation now rather than at first use
    config.effective_schema
    return config


# -- dataset loading ---------------------------------------------------------


def _apply_filters(dist: EmpiricalJoint, schema_r: CovariateSchema) -> EmpiricalJoint:
    allowed = {n: set(schema_r.levels(n)) for n in schema_r.risk_factors}
    cells = {
        key: cell
        for key, cell in dist.cells.items()
        if all(key.get(n) in allowed[n] for n in allowed)
    }
    if not cells:
        raise ConfigError(f"period {dist.period!r}: filters exclude every individual")
    return EmpiricalJoint(dist.period, schema_r, cells)


def load_datasets(config: AnalysisConfig) -> dict[str, EmpiricalJoint]:
    schema_r = config.effective_schema
    out: dict[str, EmpiricalJoint] = {}
    for ref in config.datasets:
        if ref.format == "microdata":
            dist = read_microdata_csv(ref.path, config.schema, ref.period)
        else:
            dist = read_count_csv(ref.path, config.schema, ref.period)
        out[ref.period] = (
            _apply_filters(dist, schema_r) if config.filters else dist
        )
    return out


# -- series ------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesRow:
    period: str
    group: StratumKey
    crude: OpResult
    sca: OpResult
    scc: OpResult
    pct_diff: Fraction | None


@dataclass(frozen=True)
class SeriesOutput:
    """Per (group, period): crude, SCA, SCC, and the percent distortion of
    crude against SCA. Periods ascend, groups follow schema order, and
    undefined entries stay undefined."""

    groups: tuple[str, ...]
    rows: tuple[SeriesRow, ...]
    weight_desc: str
    policy: EmptyStratumPolicy


def _resolve_standard(
    config: AnalysisConfig, dists: Mapping[str, EmpiricalJoint]
) -> tuple[WeightMeasure, StandardizationSpec, str]:
    """A-marginal weight for SCA, SCC column spec, and a description for
    output metadata."""
    if not config.standardize_over:
        raise ConfigError("analysis.standardize_over is empty")
    if config.standard_kind == "weights":
        joint = config.standard_joint
        a_weight = joint.marginal(config.standardize_over)
        return a_weight, StandardizationSpec(OperatorKind.SCC, weight=joint), "weights:joint-csv"
    std = dists[config.standard_period]
    a_weight = WeightMeasure.empirical(std, config.standardize_over)
    spec = StandardizationSpec(OperatorKind.SCC, standard_period=config.standard_period)
    return a_weight, spec, f"period:{config.standard_period}"


def build_series(
    config: AnalysisConfig,
    dists: Mapping[str, EmpiricalJoint],
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> SeriesOutput:
    if not config.groups:
        raise ConfigError("analysis.groups is empty")
    a_weight, scc_spec, desc = _resolve_standard(config, dists)
    specs = [
        ("crude", StandardizationSpec(OperatorKind.CRUDE)),
        ("sca", StandardizationSpec(OperatorKind.SCA, weight=a_weight)),
        ("scc", scc_spec),
    ]
    rows = []
    for period in sorted(dists):
        table = rate_table(
            dists[period], config.groups, specs, standards=dists, policy=policy
        )
        for group, entry in table.rows():
            crude_r, sca_r, scc_r = entry["crude"], entry["sca"], entry["scc"]
            pct = None
            if sca_r.is_defined and crude_r.is_defined and sca_r.value > 0:
                pct = percent_diff_fraction(sca_r.value, crude_r.value)
            rows.append(SeriesRow(period, group, crude_r, sca_r, scc_r, pct))
    return SeriesOutput(table.e1_names, tuple(rows), desc, policy)


# -- emission ----------------------------------------------------------------


def _fmt_rate(result: OpResult) -> str:
    if not result.is_defined:
        return "NA"
    return f"{float(result.value) * RATE_SCALE:.{RATE_DECIMALS}f}"


def _fmt_pct(pct: Fraction | None) -> str:
    return "NA" if pct is None else f"{float(pct):.{RATE_DECIMALS}f}"


def _scaled(result: OpResult) -> float | None:
    return float(result.value) * RATE_SCALE if result.is_defined else None


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _metadata(config: AnalysisConfig, series: SeriesOutput | None = None) -> dict:
    meta = {
        "schema_sha256": schema_digest(config.effective_schema),
        "groups": list(config.groups),
        "standardize_over": list(config.standardize_over),
        "rate_scale": RATE_SCALE,
        "pct_diff_definition": "abs(sca - crude) / sca * 100",
    }
    if series is not None:
        meta["weight_source"] = series.weight_desc
        meta["policy"] = series.policy.value
    return meta


def emit_series(
    series: SeriesOutput, out_dir: str | Path, config: AnalysisConfig
) -> list[Path]:
    """series.csv + series.json + the two figures beside them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "series.csv"
    header = ["period", *series.groups, "crude", "sca", "scc", "pct_diff"]
    rows = [
        [
            r.period,
            *(r.group.get(n) for n in series.groups),
            _fmt_rate(r.crude),
            _fmt_rate(r.sca),
            _fmt_rate(r.scc),
            _fmt_pct(r.pct_diff),
        ]
        for r in series.rows
    ]
    write_csv(csv_path, header, rows)

    json_path = out / "series.json"
    _write_json(
        json_path,
        {
            "format_version": FORMAT_VERSION,
            "metadata": _metadata(config, series),
            "rows": [
                {
                    "period": r.period,
                    "group": r.group.as_dict(),
                    "crude": _scaled(r.crude),
                    "sca": _scaled(r.sca),
                    "scc": _scaled(r.scc),
                    "pct_diff": None if r.pct_diff is None else float(r.pct_diff),
                }
                for r in series.rows
            ],
        },
    )
    artifacts = [csv_path, json_path]
    artifacts.append(figures.render_trend(series, out / "series_trend.png"))
    artifacts.append(figures.render_pct_diff(series, out / "series_pct_diff.png"))
    return artifacts


# -- verb pipelines ----------------------------------------------------------


@dataclass(frozen=True)
class PipelineResult:
    artifacts: tuple[Path, ...]
    messages: tuple[str, ...] = ()


def run_ingest(config: AnalysisConfig, out_dir: str | Path) -> PipelineResult:
    """Validate and normalize every dataset into count CSVs plus a summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dists = load_datasets(config)
    artifacts = []
    summary = {}
    for period in sorted(dists):
        dist = dists[period]
        path = out / f"counts_{period}.csv"
        write_count_csv(path, dist)
        artifacts.append(path)
        cases, total = dist.count()
        summary[period] = {
            "strata": len(dist.cells),
            "cases": cases,
            "population": total,
        }
    summary_path = out / "ingest.json"
    _write_json(
        summary_path,
        {
            "format_version": FORMAT_VERSION,
            "metadata": {"schema_sha256": schema_digest(config.effective_schema)},
            "periods": summary,
        },
    )
    artifacts.append(summary_path)
    return PipelineResult(tuple(artifacts))


def run_pipeline(
    config: AnalysisConfig,
    out_dir: str | Path,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> PipelineResult:
    """The rates pipeline: load, standardize, emit series artifacts."""
    dists = load_datasets(config)
    series = build_series(config, dists, policy=policy)
    artifacts = emit_series(series, out_dir, config)
    return PipelineResult(tuple(artifacts))


def run_compare(
    config: AnalysisConfig,
    out_dir: str | Path,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> PipelineResult:
    """Between-period rate differences per operator for every ascending
    period pair, scaled like the series."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dists = load_datasets(config)
    series = build_series(config, dists, policy=policy)
    index = {(r.period, r.group): r for r in series.rows}
    periods = sorted(dists)
    groups = [key for key in config.effective_schema.strata(config.groups)]

    def delta(a: OpResult, b: OpResult) -> Fraction | None:
        if a.is_defined and b.is_defined:
            return b.value - a.value
        return None

    header = [
        "period_a", "period_b", *series.groups, "d_crude", "d_sca", "d_scc",
    ]
    rows = []
    json_rows = []
    for pa, pb in combinations(periods, 2):
        for g in groups:
            ra, rb = index[(pa, g)], index[(pb, g)]
            ds = {
                "d_crude": delta(ra.crude, rb.crude),
                "d_sca": delta(ra.sca, rb.sca),
                "d_scc": delta(ra.scc, rb.scc),
            }
            rows.append(
                [
                    pa, pb, *(g.get(n) for n in series.groups),
                    *(
                        "NA" if v is None else f"{float(v) * RATE_SCALE:.{RATE_DECIMALS}f}"
                        for v in ds.values()
                    ),
                ]
            )
            json_rows.append(
                {
                    "period_a": pa,
                    "period_b": pb,
                    "group": g.as_dict(),
                    **{
                        k: (None if v is None else float(v) * RATE_SCALE)
                        for k, v in ds.items()
                    },
                }
            )
    csv_path = out / "compare.csv"
    write_csv(csv_path, header, rows)
    json_path = out / "compare.json"
    _write_json(
        json_path,
        {
            "format_version": FORMAT_VERSION,
            "metadata": _metadata(config, series),
            "rows": json_rows,
        },
    )
    return PipelineResult((csv_path, json_path))


def _verdict_obj(v: ConfoundingVerdict) -> dict:
    return {
        "condition": v.condition.value,
        "holds": v.holds,
        "max_discrepancy": float(v.max_discrepancy),
        "max_discrepancy_exact": str(v.max_discrepancy),
        "tol": float(v.tol),
        "compared": v.compared,
        "witness": None
        if v.witness is None
        else {
            "stratum": v.witness.stratum.as_dict(),
            "value_a": float(v.witness.value_a),
            "value_b": float(v.witness.value_b),
            "kind": v.witness.kind,
        },
        "undefined_strata": [k.as_dict() for k in v.undefined_strata],
        "notes": list(v.notes),
        "corroboration_max_gap": None
        if v.corroboration is None
        else float(v.corroboration),
    }


def verdict_lines(v: ConfoundingVerdict) -> list[str]:
    """Human-readable rendering of one verdict."""
    lines = [
        f"{v.condition.value}: {'holds' if v.holds else 'FAILS'} "
        f"(max discrepancy {float(v.max_discrepancy):.6g}, tol {float(v.tol):.6g}, "
        f"{v.compared} cells compared)"
    ]
    if v.witness is not None:
        lines.append(
            f"  worst at {v.witness.stratum}: "
            f"{float(v.witness.value_a):.6g} vs {float(v.witness.value_b):.6g}"
            + (f" [{v.witness.kind}]" if v.witness.kind != "discrepancy" else "")
        )
    for note in v.notes:
        lines.append(f"  note: {note}")
    return lines


def run_diagnose(
    config: AnalysisConfig,
    out_dir: str | Path,
    *,
    tol=0,
) -> PipelineResult:
    """Weight-stability checks for every ascending period pair, the
    standard-agreement check per period, and the end-to-end demo on the
    first/last pair."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not config.groups or not config.standardize_over:
        raise ConfigError("diagnose needs analysis.groups and analysis.standardize_over")
    dists = load_datasets(config)
    schema_r = config.effective_schema
    fact = Factorization.of(schema_r, config.groups)
    a = config.standardize_over
    periods = sorted(dists)

    pairs = []
    messages = []
    for pa, pb in combinations(periods, 2):
        da, db = dists[pa], dists[pb]
        block = {
            "period_a": pa,
            "period_b": pb,
            "crude_weights_stable": _verdict_obj(
                check_crude_unconfounded(da, db, fact, tol=tol)
            ),
            "sca_weights_stable": _verdict_obj(
                check_sca_unconfounded(da, db, fact, a, tol=tol)
            ),
            "sca_weights_stable_everywhere": _verdict_obj(
                check_sca_unconfounded_everywhere(da, db, a, tol=tol)
            ),
        }
        pairs.append(block)
        messages.append(f"[{pa} vs {pb}]")
        for key in (
            "crude_weights_stable",
            "sca_weights_stable",
            "sca_weights_stable_everywhere",
        ):
            v = block[key]
            messages.append(
                f"  {v['condition']}: {'holds' if v['holds'] else 'FAILS'} "
                f"(max {v['max_discrepancy']:.6g})"
            )

    per_period = []
    if config.standard_kind == "weights":
        standard = config.standard_joint
    else:
        standard = dists[config.standard_period]
    for period in periods:
        verdict = check_sca_scc_agreement(dists[period], standard, a, tol=tol)
        per_period.append(
            {"period": period, "sca_scc_agree": _verdict_obj(verdict)}
        )

    demo_obj = None
    if len(periods) >= 2:
        demo = confounding_demo(
            dists[periods[0]], dists[periods[-1]], fact, a, standard, tol=tol
        )
        def diff_rows(diffs):
            return [
                {
                    "group": k.as_dict(),
                    "diff": None if v is None else float(v) * RATE_SCALE,
                }
                for k, v in sorted(diffs.items(), key=lambda kv: schema_r.sort_index(kv[0]))
            ]
        demo_obj = {
            "period_a": periods[0],
            "period_b": periods[-1],
            "crude_diff": diff_rows(demo.crude_diff),
            "scc_diff": diff_rows(demo.scc_diff),
            "sca_diff": diff_rows(demo.sca_diff),
            "notes": list(demo.notes),
        }
        messages.extend(demo.notes)

    path = out / "diagnostics.json"
    _write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "metadata": _metadata(config),
            "pairs": pairs,
            "per_period": per_period,
            "demo": demo_obj,
        },
    )
    return PipelineResult((path,), tuple(messages))


def run_nest_check(
    config: AnalysisConfig,
    out_dir: str | Path,
    *,
    policy: EmptyStratumPolicy = EmptyStratumPolicy.STRICT,
) -> PipelineResult:
    """Recursion, pseudo-recursion, and projection reports per period."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.nesting is None:
        raise ConfigError("nest-check needs a nesting block in the config")
    if not config.standardize_over:
        raise ConfigError("nest-check needs analysis.standardize_over")
    dists = load_datasets(config)
    if config.standard_kind == "weights":
        standard = config.standard_joint
    else:
        standard = dists[config.standard_period]

    reports = []
    messages = []
    for period in sorted(dists):
        dist = dists[period]
        rec = scc_recurse(dist, standard, config.nesting, policy=policy)
        pseudo = sca_pseudo_recurse(
            dist, standard, config.standardize_over, config.nesting, policy=policy
        )
        proj = projection_checks(dist, standard, policy=policy)
        reports.append(
            {
                "period": period,
                "recursion": {
                    "outer": list(config.nesting.outer),
                    "inner": list(config.nesting.inner),
                    "max_gap": float(rec.max_gap),
                    "exact_gap": str(rec.max_gap),
                    "ok": rec.ok,
                    "mismatched": [k.as_dict() for k in rec.mismatched],
                },
                "pseudo_recursion": {
                    "standardize_over": list(config.standardize_over),
                    "max_gap": float(pseudo.max_gap),
                    "exact_gap": str(pseudo.max_gap),
                    "mismatched": [k.as_dict() for k in pseudo.mismatched],
                },
                "projection": {
                    "idempotence_max_gap": float(proj.idempotence_max_gap),
                    "tower_checks": proj.tower_checks,
                    "tower_max_gap": float(proj.tower_max_gap),
                    "cond_exp_checks": proj.cond_exp_checks,
                    "cond_exp_max_gap": float(proj.cond_exp_max_gap),
                    "violations": list(proj.violations),
                    "ok": proj.ok,
                    "seed": proj.seed,
                },
            }
        )
        messages.append(
            f"[{period}] recursion gap {float(rec.max_gap):.3e} "
            f"(ok={rec.ok}), pseudo-recursion gap {float(pseudo.max_gap):.3e}, "
            f"projection ok={proj.ok}"
        )
    path = out / "nestcheck.json"
    _write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "metadata": _metadata(config),
            "reports": reports,
        },
    )
    return PipelineResult((path,), tuple(messages))


def _fdp_weight(request: FdpRequest, models) -> WeightMeasure:
    if request.weight_kind == "csv":
        return request.weight
    some_model = next(iter(models.values()))
    if request.weight_kind == "uniform":
        return WeightMeasure.uniform(some_model.schema, some_model.schema.risk_factors)
    period = request.weight_period or sorted(models)[0]
    if period not in models:
        raise ConfigError(f"fdp weight period {period!r} not in model file")
    return models[period].cov_dist


def run_fdp_gen(
    config: AnalysisConfig, out_dir: str | Path
) -> PipelineResult:
    """Realize the model as count CSVs plus generation metadata."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.fdp is None:
        raise ConfigError("fdp-gen needs an fdp block in the config")
    request = config.fdp
    _, models = load_fdp_file(request.model_path)
    periods = request.periods or tuple(sorted(models))
    if request.sizes is None:
        raise ConfigError("fdp-gen needs fdp.sizes")
    artifacts = []
    meta_periods = {}
    for period in periods:
        if period not in models:
            raise ConfigError(f"period {period!r} not in model file")
        generated = fdp_generate(
            models[period], request.sizes, request.mode, seed=request.seed
        )
        path = out / f"fdp_counts_{period}.csv"
        write_count_csv(path, generated.data)
        artifacts.append(path)
        meta_periods[period] = {
            "mode": generated.mode.value,
            "seed": generated.seed,
            "generator": generated.generator,
            "cells": [
                {
                    "stratum": key.as_dict(),
                    "n_total": generated.sizes[key],
                    "model_rate": str(generated.model_rates[key]),
                    "expected_cases": str(generated.expected_cases[key]),
                }
                for key in sorted(generated.sizes, key=generated.data.schema.sort_index)
            ],
        }
    meta_path = out / "fdp_gen.json"
    _write_json(
        meta_path,
        {
            "format_version": FORMAT_VERSION,
            "metadata": {"model": request.model_path.name},
            "periods": meta_periods,
        },
    )
    artifacts.append(meta_path)
    return PipelineResult(tuple(artifacts))


def run_fdp_falsify(
    config: AnalysisConfig,
    out_dir: str | Path,
    *,
    from_data: bool = False,
    tol=None,
) -> PipelineResult:
    """Marginal-rate falsification: model mode decides the assumptions
    directly; data mode reports only the disjunction."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.fdp is None:
        raise ConfigError("fdp-falsify needs an fdp block in the config")
    request = config.fdp
    _, models = load_fdp_file(request.model_path)
    weight = _fdp_weight(request, models)
    periods = request.periods or tuple(sorted(models))
    if len(periods) != 2:
        raise ConfigError("fdp-falsify needs exactly two periods")
    effective_tol = tol if tol is not None else request.tol

    if from_data:
        if effective_tol is None:
            raise ConfigError(
                "data-mode falsification needs an explicit tolerance "
                "(--tol or fdp.tol): sampled rates differ by noise alone"
            )
        dists = load_datasets(config)
        for p in periods:
            if p not in dists:
                raise ConfigError(f"period {p!r} not among datasets")
        verdict = falsify_from_data(
            dists[periods[0]], dists[periods[1]], weight, effective_tol
        )
        mode = "data"
    else:
        for p in periods:
            if p not in models:
                raise ConfigError(f"period {p!r} not in model file")
        verdict = falsify(
            models[periods[0]], models[periods[1]], weight,
            effective_tol if effective_tol is not None else 0,
        )
        mode = "model"

    path = out / "falsify.json"
    _write_json(
        path,
        {
            "format_version": FORMAT_VERSION,
            "metadata": {
                "mode": mode,
                "period_a": periods[0],
                "period_b": periods[1],
                "weight_source": request.weight_kind,
            },
            "inference": verdict.inference.value,
            "difference": float(verdict.difference),
            "difference_exact": str(verdict.difference),
            "tol": float(verdict.tol),
            "idp_holds": verdict.idp_holds.value,
            "cc_holds": verdict.cc_holds.value,
            "notes": list(verdict.notes),
        },
    )
    lines = [
        f"inference: {verdict.inference.value}",
        f"marginal difference: {float(verdict.difference):.6g} "
        f"(tol {float(verdict.tol):.6g})",
        f"idp_holds={verdict.idp_holds.value} cc_holds={verdict.cc_holds.value}",
        *verdict.notes,
    ]
    return PipelineResult((path,), tuple(lines))
