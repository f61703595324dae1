"""Command-line entry point: ``python -m src.cli <subcommand>``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from src.common.errors import CalibrationError
from src.pipeline.config import add_config_arguments, config_from_args
from src.pipeline.experiment import (
    detect_only,
    export_latents_template,
    period_only,
    run_experiment,
)
from src.pipeline.report import dumps, emit_report
from src.theory.regression import (
    analytic_excess_risk_clr,
    analytic_excess_risk_glr,
    monte_carlo_excess_risk,
    random_problem,
)

LOGGER = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Detect and calibrate context-driven distribution shift")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    period = commands.add_parser("detect-period", help="Dominant period of the training split")
    add_config_arguments(period)

    detect = commands.add_parser("detect", help="Reconditionor scores over phases and segments")
    add_config_arguments(detect)

    adapt = commands.add_parser("adapt", help="SOLID on the test split with the first grid values")
    add_config_arguments(adapt)

    run = commands.add_parser("run", help="Full pipeline with validation grid search")
    add_config_arguments(run)

    export = commands.add_parser("export-latents-template", help="Write window histories as a latent file")
    add_config_arguments(export)
    export.add_argument("--output", type=Path, required=True, help="Latent file to write")
    export.add_argument("--text", action="store_true", help="Write the CSV twin instead of binary")

    theory = commands.add_parser("verify-theory", help="Analytic vs Monte-Carlo excess risk of GLR/CLR")
    theory.add_argument("--k", type=int, default=3, help="Number of context groups")
    theory.add_argument("--d", type=int, default=4, help="Feature dimension")
    theory.add_argument("--n-per-group", type=int, default=50, help="Rows per group design")
    theory.add_argument("--sigma", type=float, default=0.5, help="Noise standard deviation")
    theory.add_argument("--trials", type=int, default=10000, help="Monte-Carlo trials")
    theory.add_argument("--seed", type=int, default=0, help="Seed for the problem and the trials")
    theory.add_argument("--noise", choices=("gaussian", "uniform"), default="gaussian")
    return parser


def verify_theory(args: argparse.Namespace) -> bool:
    """Print the analytic/Monte-Carlo table; True when every row passes."""
    problem = random_problem(args.k, args.d, args.n_per_group, args.sigma, seed=args.seed)
    rows = []
    for name, analytic in (
        ("GLR", analytic_excess_risk_glr(problem)),
        ("CLR", analytic_excess_risk_clr(problem)),
    ):
        estimate = monte_carlo_excess_risk(problem, name, args.trials, args.seed, noise=args.noise)
        rows.append(
            {
                "estimator": name,
                "bias": analytic.bias,
                "variance": analytic.variance,
                "analytic": analytic.total,
                "monte_carlo": estimate.estimate,
                "se": estimate.standard_error,
                "test_noise_form": estimate.test_noise_estimate,
                "result": "PASS" if estimate.within(analytic.total) else "FAIL",
            }
        )
    table = pd.DataFrame(rows)
    print(table.to_string(index=False))
    return bool((table["result"] == "PASS").all())


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
    )

    try:
        if args.command == "verify-theory":
            return 0 if verify_theory(args) else 1

        config = config_from_args(args)
        if args.command == "detect-period":
            print(dumps(period_only(config).to_dict()))
        elif args.command == "detect":
            T_star, by_phase, by_segment = detect_only(config)
            output = {
                "T_star": T_star,
                "phase": by_phase.to_record(config.threshold),
                "segment": by_segment.to_record(config.threshold),
            }
            print(dumps(output))
        elif args.command == "export-latents-template":
            path = export_latents_template(config, args.output, binary=not args.text)
            LOGGER.info("Wrote latent template to %s", path)
        else:
            report = run_experiment(config, search=args.command == "run")
            paths = emit_report(report, config.output_dir)
            print(dumps(report.to_dict()))
            LOGGER.info("Report files: %s", ", ".join(str(path) for path in paths.values()))
            if not report.complete:
                return 2
    except CalibrationError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
