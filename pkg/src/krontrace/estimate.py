"""These sub commands run trace-estimation experiments.

'estimate' runs Kronecker-Hutchinson (or exact recovery) over a grid of
query distributions and sample counts and writes one row per cell as CSV or
JSON. 'variance' prints the exact variance formulas for the configured
matrix, optionally next to the brute-force moment oracle.
"""
import json
import logging

from .analysis.moments import moment_oracle
from .analysis.variance import required_samples, variance_report
from .emit import emit
from .exceptions import (
    BudgetExceededError,
    InvalidConfigError,
    SysExitRecommendedError,
)
from .experiment import (
    add_experiment_arguments,
    build_operator,
    config_from_args,
    has_band_violation,
    run_config,
)

LOG = logging.getLogger(__name__)


def estimate(args):
    cfg = config_from_args(args)
    rows = run_config(cfg)
    emit(rows, cfg.output_format, cfg.output_path, include_status=args.status)
    if has_band_violation(rows):
        raise SysExitRecommendedError(
            "Monte Carlo variance left the expected band; see the status column"
        )


def _report_document(report, cfg):
    document = {
        "dist": report.dist.value if report.dist else None,
        "field": report.field.value,
        "exact": report.is_exact,
        "trace": report.trace,
        "variance": report.variance,
        "second_moment": report.second_moment,
        "upper_bound_no_abar": report.upper_bound_no_abar,
        "psd_worst_case": report.psd_worst_case,
    }
    if cfg.eps is not None and report.trace != 0:
        document["required_samples"] = required_samples(
            report.variance, report.trace, cfg.eps
        )
    return document


def variance(args):
    cfg = config_from_args(args)
    operator = build_operator(cfg)
    dims = operator.dims
    matrix = operator.materialize()
    documents = []
    for dist in cfg.distributions:
        try:
            report = variance_report(
                matrix, dims, cfg.field, dist, statement_form=cfg.psd_statement_form
            )
        except ValueError as e:
            raise InvalidConfigError(str(e)) from e
        document = _report_document(report, cfg)
        if args.oracle:
            try:
                oracle = moment_oracle(matrix, dims, dist)
            except BudgetExceededError as e:
                LOG.warning("Skipping the moment oracle: %s", e)
                document["oracle_variance"] = None
            else:
                document["oracle_variance"] = oracle.variance
        documents.append(document)
    print(json.dumps(documents, indent=2))


def setup_subparsers(subparsers, parents):
    # see docstring of this file
    parser = subparsers.add_parser("estimate", description=__doc__, parents=parents)
    parser.set_defaults(command=estimate)
    add_experiment_arguments(parser)
    parser.add_argument(
        "--status",
        action="store_true",
        help="Append the status column to CSV output (JSON always has it).",
    )

    parser = subparsers.add_parser("variance", description=__doc__, parents=parents)
    parser.set_defaults(command=variance)
    add_experiment_arguments(parser)
    parser.add_argument(
        "--oracle",
        action="store_true",
        help="Also compute the variance by brute-force moment summation.",
    )
