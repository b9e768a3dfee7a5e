"""File formats: schema JSON, registry CSVs, weight CSV, model JSON.

All text artifacts are UTF-8 with LF line endings. Every CSV starts with a
`# format_version=N` comment line and readers skip any comment line; the
constrained level alphabet makes quoting unnecessary, so emitted bytes are
identical across runs and platforms. Probabilities in files may be JSON
numbers, decimal strings, or fraction strings like "1/3"; they are parsed
exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections.abc import Iterable, Mapping
from fractions import Fraction
from pathlib import Path

from .distribution import EmpiricalJoint
from .errors import ConfigError, IngestError
from .fdp import FdpModel
from .schema import CovariateSchema, StratumKey
from .weights import NORMALIZATION_TOL, WeightMeasure, exact_fraction

FORMAT_VERSION = 1
_VERSION_COMMENT = f"# format_version={FORMAT_VERSION}"


def check_format_version(value, where: str) -> None:
    try:
        version = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: format_version {value!r} is not an integer") from None
    if version != FORMAT_VERSION:
        raise ConfigError(
            f"{where}: format_version {version} unsupported (expected {FORMAT_VERSION})"
        )


# -- schema JSON -------------------------------------------------------------


def schema_to_obj(schema: CovariateSchema) -> dict:
    return {
        "columns": [
            {"name": name, "levels": list(levels)} for name, levels in schema.columns
        ],
        "risk_factors": list(schema.risk_factors),
    }


def _schema_from_obj(obj: Mapping, where: str) -> CovariateSchema:
    if "format_version" in obj:
        check_format_version(obj["format_version"], where)
    try:
        columns = [(c["name"], tuple(c["levels"])) for c in obj["columns"]]
        risk_factors = obj["risk_factors"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: malformed schema object ({exc})") from None
    return CovariateSchema.of(columns, risk_factors)


def load_schema(source: str | Path | Mapping) -> CovariateSchema:
    if isinstance(source, Mapping):
        return _schema_from_obj(source, "schema")
    path = Path(source)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return _schema_from_obj(obj, str(path))


def save_schema(schema: CovariateSchema, path: str | Path) -> None:
    obj = {"format_version": FORMAT_VERSION, **schema_to_obj(schema)}
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def schema_digest(schema: CovariateSchema) -> str:
    """Stable fingerprint of a schema, for output metadata."""
    canonical = json.dumps(schema_to_obj(schema), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# -- CSV plumbing ------------------------------------------------------------


def _read_rows(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            stripped = line[1:].strip()
            if stripped.startswith("format_version="):
                check_format_version(stripped.split("=", 1)[1], str(path))
            continue
        if line:
            lines.append(line)
    if not lines:
        raise IngestError(f"{path}: no header row")
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    header = list(reader.fieldnames or [])
    rows = list(reader)
    for i, row in enumerate(rows, start=1):
        if None in row or any(v is None for v in row.values()):
            raise IngestError(f"{path}: wrong number of fields", row_index=i)
    return header, rows


def _require_columns(header: list[str], required: Iterable[str], path: Path) -> None:
    missing = [c for c in required if c not in header]
    if missing:
        raise IngestError(f"{path}: missing required columns {missing}")


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(_VERSION_COMMENT + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# -- registry CSVs -----------------------------------------------------------


def read_microdata_csv(
    path: str | Path, schema: CovariateSchema, period: str
) -> EmpiricalJoint:
    """One row per individual: a `case` flag column plus one column per risk
    factor. Extra columns are ignored."""
    path = Path(path)
    header, rows = _read_rows(path)
    _require_columns(header, ("case", *schema.risk_factors), path)

    def records():
        for i, row in enumerate(rows, start=1):
            flag = row["case"]
            if flag not in ("0", "1"):
                raise IngestError(f"case flag must be 0 or 1, got {flag!r}", row_index=i)
            yield int(flag), row

    return EmpiricalJoint.from_records(records(), schema, period)


def read_count_csv(
    path: str | Path, schema: CovariateSchema, period: str
) -> EmpiricalJoint:
    """One row per stratum: risk-factor columns plus n_cases and n_total."""
    path = Path(path)
    header, rows = _read_rows(path)
    _require_columns(header, (*schema.risk_factors, "n_cases", "n_total"), path)

    def count_rows():
        for i, row in enumerate(rows, start=1):
            try:
                cases = int(row["n_cases"])
                total = int(row["n_total"])
            except ValueError:
                raise IngestError(
                    f"counts must be integers, got n_cases={row['n_cases']!r} "
                    f"n_total={row['n_total']!r}",
                    row_index=i,
                ) from None
            yield row, cases, total

    return EmpiricalJoint.from_counts(count_rows(), schema, period)


def write_count_csv(path: str | Path, dist: EmpiricalJoint) -> None:
    """Emit a count table in schema order; re-ingesting reproduces the
    identical distribution."""
    header = [*dist.schema.risk_factors, "n_cases", "n_total"]
    rows = [
        [*(key.get(n) for n in dist.schema.risk_factors), str(cell.cases), str(cell.total)]
        for key, cell in dist.rows()
    ]
    write_csv(Path(path), header, rows)


# -- weight CSV --------------------------------------------------------------


def read_weight_csv(
    path: str | Path,
    schema: CovariateSchema,
    *,
    tol: float = NORMALIZATION_TOL,
) -> WeightMeasure:
    """Covariate columns plus a `weight` column; weights may be decimals or
    fraction strings and must total 1 within tol."""
    path = Path(path)
    header, rows = _read_rows(path)
    if "weight" not in header:
        raise IngestError(f"{path}: missing required columns ['weight']")
    names = [c for c in header if c != "weight"]
    if not names:
        raise IngestError(f"{path}: no covariate columns")
    mapping = {}
    for i, row in enumerate(rows, start=1):
        key = StratumKey(tuple((n, row[n]) for n in names))
        if key in mapping:
            raise IngestError(f"duplicate weight row for {key}", row_index=i)
        try:
            mapping[key] = exact_fraction(row["weight"])
        except (ValueError, ZeroDivisionError):
            raise IngestError(
                f"cannot parse weight {row['weight']!r}", row_index=i
            ) from None
    return WeightMeasure.from_mapping(schema, names, mapping, tol=tol)


def write_weight_csv(path: str | Path, weight: WeightMeasure) -> None:
    header = [*weight.names, "weight"]
    rows = [
        [*(key.get(n) for n in weight.names), str(mass)]
        for key, mass in weight.items()
    ]
    write_csv(Path(path), header, rows)


# -- disease-probability model JSON -----------------------------------------


def _stratum_from_obj(obj: Mapping, where: str) -> StratumKey:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: stratum must be an object of name: level")
    return StratumKey(tuple((str(k), str(v)) for k, v in obj.items()))


def _prob_row_from_obj(obj: Mapping, where: str) -> dict[str, Fraction]:
    try:
        return {str(u): exact_fraction(v) for u, v in obj.items()}
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: bad probability ({exc})") from None


def load_fdp_file(source: str | Path) -> tuple[CovariateSchema, dict[str, FdpModel]]:
    """Model file: embedded schema, u levels, and per-period tables
    (covariate distribution, u mixing per stratum, disease probability per
    stratum and u level)."""
    path = Path(source)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    where = str(path)
    if "format_version" in obj:
        check_format_version(obj["format_version"], where)
    for field in ("schema", "u_levels", "periods"):
        if field not in obj:
            raise ConfigError(f"{where}: missing field {field!r}")
    schema = _schema_from_obj(obj["schema"], where)
    u_levels = tuple(str(u) for u in obj["u_levels"])

    models: dict[str, FdpModel] = {}
    for period, tables in obj["periods"].items():
        pwhere = f"{where}: period {period!r}"
        for field in ("cov_dist", "u_given_e", "d_given_eu"):
            if field not in tables:
                raise ConfigError(f"{pwhere}: missing table {field!r}")
        cov = {}
        for row in tables["cov_dist"]:
            key = _stratum_from_obj(row.get("stratum", {}), pwhere)
            try:
                cov[key] = exact_fraction(row["mass"])
            except (KeyError, ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{pwhere}: bad cov_dist row ({exc})") from None
        u_given_e = {
            _stratum_from_obj(row.get("stratum", {}), pwhere): _prob_row_from_obj(
                row.get("p", {}), pwhere
            )
            for row in tables["u_given_e"]
        }
        d_given_eu = {
            _stratum_from_obj(row.get("stratum", {}), pwhere): _prob_row_from_obj(
                row.get("p", {}), pwhere
            )
            for row in tables["d_given_eu"]
        }
        cov_dist = WeightMeasure.from_mapping(
            schema, schema.risk_factors, cov, tol=NORMALIZATION_TOL
        )
        models[period] = FdpModel(
            period, schema, u_levels, cov_dist, u_given_e, d_given_eu
        )
    if not models:
        raise ConfigError(f"{where}: no periods")
    return schema, models


def save_fdp_file(
    path: str | Path, schema: CovariateSchema, models: Mapping[str, FdpModel]
) -> None:
    def stratum_obj(key: StratumKey) -> dict[str, str]:
        return {n: key.get(n) for n in schema.risk_factors if n in key.names}

    periods = {}
    for period in sorted(models):
        m = models[period]
        periods[period] = {
            "cov_dist": [
                {"stratum": stratum_obj(k), "mass": str(v)} for k, v in m.cov_dist.items()
            ],
            "u_given_e": [
                {"stratum": stratum_obj(k), "p": {u: str(p) for u, p in m.u_given_e[k].items()}}
                for k in sorted(m.u_given_e, key=schema.sort_index)
            ],
            "d_given_eu": [
                {"stratum": stratum_obj(k), "p": {u: str(p) for u, p in m.d_given_eu[k].items()}}
                for k in sorted(m.d_given_eu, key=schema.sort_index)
            ],
        }
    obj = {
        "format_version": FORMAT_VERSION,
        "schema": schema_to_obj(schema),
        "u_levels": list(next(iter(models.values())).u_levels),
        "periods": periods,
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
