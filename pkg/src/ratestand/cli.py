"""Command-line interface.

Every verb reads one config file and writes its artifacts under --out-dir.
Exit status is 0 on success and 1 on any library error, including strict
empty-stratum failures; messages go to stderr, artifact paths to stdout.
"""

from __future__ import annotations

import argparse
import sys

from .errors import RateStandError
from .operators import EmptyStratumPolicy
from .pipeline import (
    load_config,
    run_compare,
    run_diagnose,
    run_fdp_falsify,
    run_fdp_gen,
    run_ingest,
    run_nest_check,
    run_pipeline,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratestand",
        description=(
            "Standardized disease rates over categorical registries: "
            "crude/SCA/SCC tables, confounding diagnostics, nesting checks, "
            "and synthetic registries from disease-probability models."
        ),
    )
    parser.add_argument(
        "--config", required=True, help="analysis config JSON"
    )
    parser.add_argument(
        "--out-dir", default=".", help="directory for emitted artifacts"
    )
    parser.add_argument(
        "--policy",
        choices=[p.value for p in EmptyStratumPolicy],
        default=EmptyStratumPolicy.STRICT.value,
        help="what to do when standard weight falls on an empty stratum",
    )
    parser.add_argument(
        "--tol",
        default=None,
        help="tolerance for diagnostics/falsification (exact fraction or decimal)",
    )

    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("ingest", help="validate datasets and emit normalized count tables")
    sub.add_parser("rates", help="emit the crude/sca/scc series with figures")
    sub.add_parser("compare", help="emit between-period differences per operator")
    sub.add_parser("diagnose", help="emit confounding verdicts and the demo report")
    sub.add_parser("nest-check", help="emit recursion/projection property reports")
    sub.add_parser("fdp-gen", help="realize a disease-probability model as counts")
    falsify = sub.add_parser(
        "fdp-falsify", help="marginal-rate falsification of model assumptions"
    )
    falsify.add_argument(
        "--from-data",
        action="store_true",
        help="use the configured datasets instead of model tables "
        "(assumption verdicts stay unknown)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    policy = EmptyStratumPolicy(args.policy)
    tol = args.tol

    try:
        config = load_config(args.config)
        if args.verb == "ingest":
            result = run_ingest(config, args.out_dir)
        elif args.verb == "rates":
            result = run_pipeline(config, args.out_dir, policy=policy)
        elif args.verb == "compare":
            result = run_compare(config, args.out_dir, policy=policy)
        elif args.verb == "diagnose":
            result = run_diagnose(config, args.out_dir, tol=tol if tol is not None else 0)
        elif args.verb == "nest-check":
            result = run_nest_check(config, args.out_dir, policy=policy)
        elif args.verb == "fdp-gen":
            result = run_fdp_gen(config, args.out_dir)
        elif args.verb == "fdp-falsify":
            result = run_fdp_falsify(
                config, args.out_dir, from_data=args.from_data, tol=tol
            )
        else:  # pragma: no cover - argparse enforces the choices
            raise AssertionError(args.verb)
    except RateStandError as exc:
        print(f"ratestand {args.verb}: error: {exc}", file=sys.stderr)
        return 1

    for line in result.messages:
        print(line)
    for path in result.artifacts:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
