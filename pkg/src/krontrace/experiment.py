"""Configuration-driven trace-estimation experiments.

One :class:`ExperimentConfig` describes a matrix, a set of query
distributions and a grid of sample counts. :func:`run_config` turns it into
one :class:`ResultRow` per ``(distribution, ℓ)`` cell, comparing Monte Carlo
estimates against the exact variance formulas.
"""
import logging
import math
from argparse import FileType
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Tuple

import numpy as np

from .analysis.variance import (
    exact_variance,
    psd_worst_case_bound,
    required_samples,
    variance_upper_bound_no_abar,
)
from .data_loaders import load_experiment_config
from .estimators import (
    diagonal_trace,
    exact_kron_recovery,
    rank_one_exact_trace,
    sample_quadratic_forms,
)
from .exceptions import (
    BudgetExceededError,
    DegenerateQueryError,
    InvalidConfigError,
    MatrixFormatError,
)
from .interface import MatrixKind, OutputFormat, QueryDistribution, RunMode, ScalarField
from .operators import (
    AllOnesOperator,
    Budgets,
    Dims,
    ExplicitDenseOperator,
    RankOneOperator,
    WishartKronOperator,
)
from .operators.matrix_io import read_dense_matrix, read_kron_factors
from .rng import RngStream
from .subsystems import is_psd

LOG = logging.getLogger(__name__)

SEEDED_KINDS = frozenset(
    {
        MatrixKind.rank_one_seed,
        MatrixKind.wishart_seed,
        MatrixKind.random_dense_seed,
        MatrixKind.random_psd_seed,
    }
)
FILE_KINDS = frozenset({MatrixKind.dense_file, MatrixKind.kron_factors_file})

KURTOSIS_GUARD = 3
BAND_SIGMAS = 5

STATUS_OK = "ok"
STATUS_BUDGET_SKIPPED = "budget_skipped"
STATUS_BAND_VIOLATION = "band_violation"


@dataclass(frozen=True)
class MatrixSpec:
    kind: MatrixKind
    seed: Optional[int] = None
    path: Optional[str] = None

    @classmethod
    def parse(cls, text):
        """Parse ``kind`` or ``kind:argument`` as used on the command line.

        >>> MatrixSpec.parse("wishart_seed:7")
        MatrixSpec(kind=<MatrixKind.wishart_seed: 'wishart_seed'>, seed=7, path=None)
        """
        name, sep, argument = text.partition(":")
        try:
            kind = MatrixKind(name.strip())
        except ValueError:
            raise InvalidConfigError(f"Unknown matrix kind '{name}'") from None
        if kind in SEEDED_KINDS:
            try:
                return cls(kind, seed=int(argument))
            except ValueError:
                raise InvalidConfigError(
                    f"Matrix kind '{kind.value}' needs an integer seed,"
                    f" e.g. '{kind.value}:7'"
                ) from None
        if kind in FILE_KINDS:
            return cls(kind, path=argument or None)
        if sep:
            raise InvalidConfigError(f"Matrix kind '{kind.value}' takes no argument")
        return cls(kind)

    @classmethod
    def from_document(cls, value, matrix_path=None):
        if isinstance(value, str):
            spec = cls.parse(value)
        else:
            spec = cls(MatrixKind(value["kind"]), value.get("seed"), value.get("path"))
        if matrix_path is not None and spec.path is None:
            spec = replace(spec, path=matrix_path)
        spec.validate()
        return spec

    def validate(self):
        if self.kind in SEEDED_KINDS and self.seed is None:
            raise InvalidConfigError(f"Matrix kind '{self.kind.value}' needs a seed")
        if self.kind in FILE_KINDS and not self.path:
            raise InvalidConfigError(f"Matrix kind '{self.kind.value}' needs a path")

    def __str__(self):
        if self.seed is not None:
            return f"{self.kind.value}:{self.seed}"
        if self.path is not None:
            return f"{self.kind.value}:{self.path}"
        return self.kind.value


@dataclass(frozen=True)
class ExperimentConfig:  # pylint: disable=too-many-instance-attributes
    d: int
    k: int
    matrix: MatrixSpec
    field: ScalarField = ScalarField.Real
    distributions: Tuple[QueryDistribution, ...] = (QueryDistribution.RealGaussian,)
    samples: Tuple[int, ...] = (100,)
    mc_trials: int = 1000
    eps: Optional[float] = None
    seed: int = 0
    output_path: Optional[str] = None
    output_format: OutputFormat = OutputFormat.csv
    mode: Optional[RunMode] = None
    experiment_id: Optional[str] = None
    workers: int = 1
    psd_statement_form: bool = False

    def __post_init__(self):
        def normalize(name, value):
            object.__setattr__(self, name, value)

        if isinstance(self.matrix, str):
            normalize("matrix", MatrixSpec.parse(self.matrix))
        self.matrix.validate()
        try:
            normalize("field", ScalarField.parse(self.field))
            normalize(
                "distributions",
                tuple(QueryDistribution.parse(dist) for dist in self.distributions),
            )
            normalize("output_format", OutputFormat(self.output_format))
            if self.mode is None:
                # a rank-one matrix is traced exactly from a single query
                default = (
                    RunMode.recovery
                    if self.matrix.kind is MatrixKind.rank_one_seed
                    else RunMode.hutchinson
                )
                normalize("mode", default)
            normalize("mode", RunMode(self.mode))
        except ValueError as e:
            raise InvalidConfigError(str(e)) from e
        normalize("samples", tuple(int(ell) for ell in self.samples))
        if self.experiment_id is None:
            normalize("experiment_id", f"{self.matrix.kind.value}-{self.seed}")
        self._check()

    def _check(self):
        if self.d < 1 or self.k < 1:
            raise InvalidConfigError(f"d and k must be >= 1, got d={self.d} k={self.k}")
        if not self.distributions:
            raise InvalidConfigError("At least one query distribution is required")
        if not self.samples or min(self.samples) < 1:
            raise InvalidConfigError(f"Sample counts must be >= 1: {self.samples}")
        if self.mc_trials < 2:
            raise InvalidConfigError(f"mc_trials must be >= 2, got {self.mc_trials}")
        if self.workers < 1:
            raise InvalidConfigError(f"workers must be >= 1, got {self.workers}")
        if self.eps is not None and self.eps <= 0:
            raise InvalidConfigError(f"eps must be positive, got {self.eps}")
        if self.field is ScalarField.Real:
            for dist in self.distributions:
                if dist.field is ScalarField.Complex:
                    raise InvalidConfigError(
                        f"Distribution {dist.value} needs a Complex run"
                    )

    @classmethod
    def from_document(cls, raw):
        output = raw.get("output", {})
        return cls(
            d=raw["d"],
            k=raw["k"],
            matrix=MatrixSpec.from_document(raw["matrix"], raw.get("matrix_path")),
            field=raw.get("field", ScalarField.Real),
            distributions=tuple(
                raw.get("distributions", [QueryDistribution.RealGaussian])
            ),
            samples=tuple(raw.get("samples", [100])),
            mc_trials=raw.get("mc_trials", 1000),
            eps=raw.get("eps"),
            seed=raw.get("seed", 0),
            output_path=output.get("path"),
            output_format=output.get("format", OutputFormat.csv),
            mode=raw.get("mode"),
            experiment_id=raw.get("experiment_id"),
            workers=raw.get("workers", 1),
            psd_statement_form=raw.get("psd_statement_form", False),
        )

    @classmethod
    def load(cls, config_file):
        return cls.from_document(load_experiment_config(config_file))


@dataclass(frozen=True)
class ResultRow:  # pylint: disable=too-many-instance-attributes
    experiment_id: str
    d: int
    k: int
    field: ScalarField
    dist: QueryDistribution
    matrix_kind: MatrixKind
    seed: int
    n_samples: int
    trace_true: Optional[float]
    estimate_mean: Optional[float]
    estimate_stderr: Optional[float]
    empirical_var: Optional[float]
    exact_var: Optional[float]
    upper_bound_var: Optional[float]
    psd_bound: Optional[float]
    required_samples_for_eps: Optional[int]
    queries_used: Optional[int]
    status: str = STATUS_OK

    def to_document(self):
        document = asdict(self)
        for name in ("field", "dist", "matrix_kind"):
            document[name] = document[name].value
        return document


ROW_COLUMNS = tuple(f.name for f in fields(ResultRow))
RESULT_COLUMNS = ROW_COLUMNS[:-1]


def seeded_matrix(kind, dims, seed):
    """Dense matrix for ``random_dense_seed`` / ``random_psd_seed``."""
    gaussian = RngStream(seed).generator().standard_normal((dims.D, dims.D))
    if kind is MatrixKind.random_psd_seed:
        return gaussian.T @ gaussian
    return gaussian


def build_operator(cfg, budgets=None):
    budgets = budgets or Budgets.from_env()
    dims = Dims(cfg.d, cfg.k, budgets.max_dimension)
    spec = cfg.matrix
    if spec.kind is MatrixKind.all_ones:
        return AllOnesOperator(dims)
    if spec.kind is MatrixKind.rank_one_seed:
        vector = RngStream(spec.seed).generator().standard_normal(dims.D)
        return RankOneOperator(vector, dims)
    if spec.kind is MatrixKind.wishart_seed:
        return WishartKronOperator(dims, spec.seed)
    if spec.kind in (MatrixKind.random_dense_seed, MatrixKind.random_psd_seed):
        return ExplicitDenseOperator(seeded_matrix(spec.kind, dims, spec.seed), dims)
    if spec.kind is MatrixKind.dense_file:
        matrix, file_dims = read_dense_matrix(spec.path, cfg.k, budgets.max_dimension)
        operator = ExplicitDenseOperator(matrix, file_dims)
    else:
        operator = read_kron_factors(spec.path, budgets.max_dimension)
    if operator.dims != dims:
        raise MatrixFormatError(
            f"{spec.path}: matrix has d={operator.dims.d} k={operator.dims.k},"
            f" the experiment expects d={dims.d} k={dims.k}"
        )
    return operator


@dataclass(frozen=True)
class ExactColumns:
    exact_var: Optional[float] = None
    upper_bound_var: Optional[float] = None
    psd_bound: Optional[float] = None
    status: str = STATUS_OK


class _Reference:
    """Exact quantities shared by every cell of one experiment."""

    def __init__(self, operator, cfg, budgets):
        self.cfg = cfg
        self.budgets = budgets
        self.operator = operator
        trace = operator.factor_trace()
        if trace is None:
            trace = diagonal_trace(operator)
        self.trace = trace
        self._dense = None
        self._exact = {}

    def exact_for(self, field):
        if field not in self._exact:
            self._exact[field] = self._compute_exact(field)
        return self._exact[field]

    def _compute_exact(self, field):
        dims = self.operator.dims
        try:
            self.budgets.check_subsets(dims.k)
            if self._dense is None:
                self._dense = self.operator.materialize()
            psd_bound = None
            if is_psd(self._dense):
                psd_bound = psd_worst_case_bound(
                    max(self.trace, 0.0), dims.k, field, self.cfg.psd_statement_form
                )
            return ExactColumns(
                exact_var=exact_variance(self._dense, dims, field, self.budgets),
                upper_bound_var=variance_upper_bound_no_abar(
                    self._dense, dims, field, self.budgets
                ),
                psd_bound=psd_bound,
            )
        except BudgetExceededError as e:
            LOG.warning("Skipping exact %s variance: %s", field.value, e)
            return ExactColumns(status=STATUS_BUDGET_SKIPPED)
        except ValueError as e:
            LOG.warning("Exact %s variance unavailable: %s", field.value, e)
            return ExactColumns(status=f"error: {e}")

    def required_samples(self, exact_var):
        if self.cfg.eps is None or exact_var is None or self.trace == 0:
            return None
        return required_samples(exact_var, self.trace, self.cfg.eps)


def variance_band(trials, exact_var):
    """Allowed ``|empirical_var - exact_var|`` for ``trials`` single-sample values.

    The wider of a fixed-kurtosis band and ``BAND_SIGMAS`` standard errors of
    the sample variance estimated from the trials' own fourth moment.
    """
    n = trials.size
    fixed = (
        BAND_SIGMAS * exact_var * math.sqrt(2 / (n - 1)) * math.sqrt(1 + KURTOSIS_GUARD)
    )
    centred = trials - trials.mean()
    second = np.mean(centred**2)
    fourth = np.mean(centred**4)
    empirical = BAND_SIGMAS * math.sqrt(max(fourth - second**2, 0.0) / n)
    return max(fixed, empirical)


def within_band(trials, empirical_var, exact_var, dist):
    """Rademacher formulas are upper bounds, so only exceeding them is a violation."""
    band = variance_band(trials, exact_var)
    if dist.is_gaussian:
        return abs(empirical_var - exact_var) <= band
    return empirical_var <= exact_var + band


def _row(cfg, dist, reference, exact, **values):
    return ResultRow(
        experiment_id=cfg.experiment_id,
        d=cfg.d,
        k=cfg.k,
        field=dist.field,
        dist=dist,
        matrix_kind=cfg.matrix.kind,
        seed=cfg.seed,
        trace_true=reference.trace if reference else None,
        exact_var=exact.exact_var,
        upper_bound_var=exact.upper_bound_var,
        psd_bound=exact.psd_bound,
        required_samples_for_eps=(
            reference.required_samples(exact.exact_var) if reference else None
        ),
        **values,
    )


def _hutchinson_rows(operator, dist, cfg, reference):
    count = max(max(cfg.samples), cfg.mc_trials)
    LOG.info("Cell %s: %d samples on %r", dist.value, count, operator)
    values = np.real(sample_quadratic_forms(operator, dist, count, RngStream(cfg.seed)))
    trials = values[: cfg.mc_trials]
    empirical_var = float(np.var(trials, ddof=1))
    exact = reference.exact_for(dist.field)
    status = exact.status
    if exact.exact_var is not None and not within_band(
        trials, empirical_var, exact.exact_var, dist
    ):
        LOG.warning(
            "%s: empirical variance %.6g is outside the band around %.6g",
            dist.value,
            empirical_var,
            exact.exact_var,
        )
        status = STATUS_BAND_VIOLATION
    rows = []
    for ell in cfg.samples:
        rows.append(
            _row(
                cfg,
                dist,
                reference,
                exact,
                n_samples=ell,
                estimate_mean=float(values[:ell].sum() / ell),
                estimate_stderr=math.sqrt(empirical_var / ell),
                empirical_var=empirical_var,
                queries_used=ell,
                status=status,
            )
        )
    return rows


def _recovery_row(operator, cfg, reference):
    rng = RngStream(cfg.seed)
    dist = QueryDistribution.RealGaussian
    exact = reference.exact_for(ScalarField.Real)
    start = operator.query_count
    try:
        if cfg.matrix.kind is MatrixKind.rank_one_seed:
            value = rank_one_exact_trace(operator, rng)
        else:
            value = exact_kron_recovery(operator, rng).trace
    except DegenerateQueryError as e:
        LOG.warning("Recovery query was degenerate: %s", e)
        value, exact = None, replace(exact, status=f"error: {e}")
    return _row(
        cfg,
        dist,
        reference,
        exact,
        n_samples=1,
        estimate_mean=value,
        estimate_stderr=0.0 if value is not None else None,
        empirical_var=None,
        queries_used=operator.query_count - start,
        status=exact.status,
    )


def _skipped_rows(cfg, reason):
    exact = ExactColumns(status=reason)
    dists = cfg.distributions
    if cfg.mode is RunMode.recovery:
        dists = (QueryDistribution.RealGaussian,)
    samples = cfg.samples if cfg.mode is RunMode.hutchinson else (1,)
    return [
        _row(
            cfg,
            dist,
            None,
            exact,
            n_samples=ell,
            estimate_mean=None,
            estimate_stderr=None,
            empirical_var=None,
            queries_used=None,
            status=reason,
        )
        for dist in dists
        for ell in samples
    ]


def row_order(row):
    return (list(QueryDistribution).index(row.dist), row.n_samples)


def run_config(cfg, budgets=None):
    """Run every ``(distribution, ℓ)`` cell of ``cfg``; rows sorted by ``(dist, ℓ)``."""
    budgets = budgets or Budgets.from_env()
    LOG.info("Running experiment %s (%s mode)", cfg.experiment_id, cfg.mode.value)
    try:
        operator = build_operator(cfg, budgets)
    except BudgetExceededError as e:
        LOG.warning("Experiment %s skipped: %s", cfg.experiment_id, e)
        return sorted(_skipped_rows(cfg, STATUS_BUDGET_SKIPPED), key=row_order)
    reference = _Reference(operator, cfg, budgets)

    if cfg.mode is RunMode.recovery:
        rows = [_recovery_row(operator, cfg, reference)]
    else:
        # exact columns are shared, compute them before fanning out
        for dist in cfg.distributions:
            reference.exact_for(dist.field)
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            cells = executor.map(
                lambda dist: _hutchinson_rows(operator, dist, cfg, reference),
                cfg.distributions,
            )
            rows = [row for cell in cells for row in cell]
    return sorted(rows, key=row_order)


def has_band_violation(rows):
    return any(row.status == STATUS_BAND_VIOLATION for row in rows)


def add_experiment_arguments(parser):
    """Flags mirroring :class:`ExperimentConfig`; ``--config`` replaces them all."""
    parser.add_argument("--d", type=int, default=2, help="Subsystem dimension.")
    parser.add_argument("--k", type=int, default=2, help="Number of subsystems.")
    parser.add_argument(
        "--field",
        type=ScalarField.parse,
        default=ScalarField.Real,
        help="Scalar field of the queries (real or complex).",
    )
    parser.add_argument(
        "--dist",
        dest="distributions",
        nargs="+",
        type=QueryDistribution.parse,
        default=[QueryDistribution.RealGaussian],
        help="Query distributions, e.g. RealGaussian complex_rademacher.",
    )
    parser.add_argument(
        "--samples",
        nargs="+",
        type=int,
        default=[100],
        help="Grid of sample counts ℓ.",
    )
    parser.add_argument("--mc-trials", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--eps", type=float, default=None, help="Relative accuracy.")
    parser.add_argument(
        "--matrix",
        default="all_ones",
        help="Matrix spec: all_ones, wishart_seed:<seed>, dense_file:<path>, ...",
    )
    parser.add_argument(
        "--mode",
        choices=[mode.value for mode in RunMode],
        default=None,
        help="hutchinson (default) or exact recovery.",
    )
    parser.add_argument("--experiment-id", default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--psd-statement-form",
        action="store_true",
        help="Report the PSD bound as (3^k tr A)^2 instead of 3^k (tr A)^2.",
    )
    parser.add_argument("--out", default=None, help="Output path (default: stdout).")
    parser.add_argument(
        "--format",
        dest="output_format",
        choices=[fmt.value for fmt in OutputFormat],
        default=OutputFormat.csv.value,
    )
    parser.add_argument(
        "--config",
        type=FileType("r", encoding="utf-8"),
        default=None,
        help="JSON experiment config; replaces every other flag.",
    )


def config_from_args(args):
    if args.config is not None:
        with args.config as f:
            return ExperimentConfig.load(f)
    try:
        return ExperimentConfig(
            d=args.d,
            k=args.k,
            matrix=MatrixSpec.parse(args.matrix),
            field=args.field,
            distributions=tuple(args.distributions),
            samples=tuple(args.samples),
            mc_trials=args.mc_trials,
            eps=args.eps,
            seed=args.seed,
            output_path=args.out,
            output_format=args.output_format,
            mode=args.mode,
            experiment_id=args.experiment_id,
            workers=args.workers,
            psd_statement_form=args.psd_statement_form,
        )
    except ValueError as e:
        raise InvalidConfigError(str(e)) from e
