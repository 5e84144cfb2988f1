import json
from dataclasses import replace
from io import StringIO

import numpy as np
import pytest

from krontrace.exceptions import InvalidConfigError, MatrixFormatError
from krontrace.experiment import (
    RESULT_COLUMNS,
    ROW_COLUMNS,
    STATUS_BAND_VIOLATION,
    STATUS_BUDGET_SKIPPED,
    STATUS_OK,
    ExperimentConfig,
    MatrixSpec,
    build_operator,
    has_band_violation,
    run_config,
    variance_band,
    within_band,
)
from krontrace.interface import MatrixKind, QueryDistribution, RunMode, ScalarField
from krontrace.operators import Budgets, WishartKronOperator
from krontrace.operators.matrix_io import write_dense_matrix
from krontrace.rng import RngStream

from .utils import dims, random_complex, random_matrix


def config(**kwargs):
    values = {"d": 2, "k": 2, "matrix": "all_ones", "mc_trials": 500}
    values.update(kwargs)
    return ExperimentConfig(**values)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("all_ones", MatrixSpec(MatrixKind.all_ones)),
        ("wishart_seed:7", MatrixSpec(MatrixKind.wishart_seed, seed=7)),
        ("rank_one_seed:0", MatrixSpec(MatrixKind.rank_one_seed, seed=0)),
        ("dense_file:a.bin", MatrixSpec(MatrixKind.dense_file, path="a.bin")),
        (
            "kron_factors_file:c:/factors.json",
            MatrixSpec(MatrixKind.kron_factors_file, path="c:/factors.json"),
        ),
    ],
)
def test_matrix_spec_parse(text, expected):
    spec = MatrixSpec.parse(text)
    assert spec == expected
    assert str(spec) == text


@pytest.mark.parametrize(
    "text", ["ones", "wishart_seed", "wishart_seed:x", "all_ones:3", "random_psd_seed:"]
)
def test_matrix_spec_parse_invalid(text):
    with pytest.raises(InvalidConfigError):
        MatrixSpec.parse(text)


def test_matrix_spec_from_document():
    spec = MatrixSpec.from_document({"kind": "random_dense_seed", "seed": 4})
    assert spec == MatrixSpec(MatrixKind.random_dense_seed, seed=4)
    spec = MatrixSpec.from_document("dense_file", matrix_path="a.csv")
    assert spec.path == "a.csv"
    with pytest.raises(InvalidConfigError):
        MatrixSpec.from_document({"kind": "kron_factors_file"})


def test_config_defaults():
    cfg = config()
    assert cfg.mode is RunMode.hutchinson
    assert cfg.experiment_id == "all_ones-0"
    assert cfg.distributions == (QueryDistribution.RealGaussian,)
    assert cfg.field is ScalarField.Real


def test_config_rank_one_defaults_to_recovery():
    assert config(matrix="rank_one_seed:1").mode is RunMode.recovery
    cfg = config(matrix="rank_one_seed:1", mode="hutchinson")
    assert cfg.mode is RunMode.hutchinson


def test_config_normalizes_strings():
    cfg = config(field="complex", distributions=("complex_gaussian",), samples=("5",))
    assert cfg.field is ScalarField.Complex
    assert cfg.distributions == (QueryDistribution.ComplexGaussian,)
    assert cfg.samples == (5,)


@pytest.mark.parametrize(
    "change",
    [
        {"d": 0},
        {"samples": ()},
        {"samples": (0,)},
        {"mc_trials": 1},
        {"workers": 0},
        {"eps": 0.0},
        {"distributions": ()},
        {"distributions": ("ComplexGaussian",)},
        {"distributions": ("Gaussian",)},
        {"mode": "exact"},
        {"output_format": "xml"},
        {"matrix": "dense_file"},
    ],
)
def test_config_invalid(change):
    with pytest.raises(InvalidConfigError):
        config(**change)


def test_config_load():
    document = {
        "d": 2,
        "k": 3,
        "matrix": {"kind": "wishart_seed", "seed": 2},
        "field": "Complex",
        "distributions": ["RealGaussian", "ComplexRademacher"],
        "samples": [10, 20],
        "eps": 0.5,
        "output": {"format": "json"},
    }
    cfg = ExperimentConfig.load(StringIO(json.dumps(document)))
    assert cfg.k == 3
    assert cfg.matrix == MatrixSpec(MatrixKind.wishart_seed, seed=2)
    assert cfg.distributions == (
        QueryDistribution.RealGaussian,
        QueryDistribution.ComplexRademacher,
    )
    assert cfg.output_format.value == "json"
    assert cfg.output_path is None


def test_config_load_invalid():
    with pytest.raises(InvalidConfigError):
        ExperimentConfig.load(StringIO(json.dumps({"d": 2, "k": 2})))


def test_build_operator_seeded_kinds():
    operator = build_operator(config(matrix="wishart_seed:3"))
    assert isinstance(operator, WishartKronOperator)
    np.testing.assert_array_equal(
        operator.materialize(), WishartKronOperator(dims(2, 2), 3).materialize()
    )
    psd = build_operator(config(matrix="random_psd_seed:1")).materialize()
    assert np.all(np.linalg.eigvalsh(psd) > -1e-10)
    rank_one = build_operator(config(matrix="rank_one_seed:1")).materialize()
    assert np.linalg.matrix_rank(rank_one) == 1


def test_build_operator_dense_file(tmp_path):
    path = tmp_path / "a.bin"
    matrix = random_matrix(2, 2, 5)
    write_dense_matrix(path, matrix, dims(2, 2))
    operator = build_operator(config(matrix=f"dense_file:{path}"))
    np.testing.assert_array_equal(operator.materialize(), matrix)


def test_build_operator_dense_file_dims_mismatch(tmp_path):
    path = tmp_path / "a.bin"
    write_dense_matrix(path, np.eye(8), dims(2, 3))
    with pytest.raises(MatrixFormatError):
        build_operator(config(matrix=f"dense_file:{path}"))


def test_run_config_columns():
    cfg = config(
        distributions=("RealRademacher",), samples=(100, 10), eps=0.1, mc_trials=200
    )
    rows = run_config(cfg)
    assert [row.n_samples for row in rows] == [10, 100]
    for row in rows:
        assert row.trace_true == 4
        assert row.exact_var == pytest.approx(128)
        assert row.upper_bound_var == pytest.approx(128)
        assert row.psd_bound == pytest.approx(144)
        assert row.required_samples_for_eps == 800
        assert row.queries_used == row.n_samples
        # Rademacher variance on all-ones is 48, well inside the bound
        assert row.status == STATUS_OK
        assert row.empirical_var == pytest.approx(48, rel=0.5)
    assert not has_band_violation(rows)


def test_run_config_row_order():
    cfg = config(
        field="Complex",
        distributions=("ComplexGaussian", "RealRademacher"),
        samples=(20, 5),
        mc_trials=50,
    )
    rows = run_config(cfg)
    assert [(row.dist, row.n_samples) for row in rows] == [
        (QueryDistribution.RealRademacher, 5),
        (QueryDistribution.RealRademacher, 20),
        (QueryDistribution.ComplexGaussian, 5),
        (QueryDistribution.ComplexGaussian, 20),
    ]
    assert rows[0].exact_var == pytest.approx(128)
    assert rows[-1].exact_var == pytest.approx(48)
    assert rows[0].required_samples_for_eps is None
    assert [row.field for row in rows] == [ScalarField.Real] * 2 + [ScalarField.Complex] * 2


@pytest.mark.slow
def test_run_config_all_ones_variance_within_five_percent():
    (row,) = run_config(config(samples=(10,), mc_trials=200_000, seed=0))
    assert row.status == STATUS_OK
    assert abs(row.empirical_var - 128) <= 0.05 * 128


def test_run_config_is_deterministic():
    cfg = config(
        matrix="wishart_seed:2",
        distributions=("RealGaussian", "RealRademacher"),
        samples=(10, 50),
        mc_trials=100,
    )
    assert run_config(cfg) == run_config(cfg)
    threaded = replace(cfg, workers=2)
    assert run_config(threaded) == run_config(cfg)


def test_run_config_seed_changes_estimates():
    first = run_config(config(matrix="wishart_seed:2", seed=1, samples=(10,)))
    second = run_config(config(matrix="wishart_seed:2", seed=2, samples=(10,)))
    assert first[0].estimate_mean != second[0].estimate_mean
    assert first[0].trace_true == second[0].trace_true


def test_run_config_recovery_row():
    rows = run_config(config(d=3, k=2, matrix="wishart_seed:4", mode="recovery"))
    (row,) = rows
    assert row.dist is QueryDistribution.RealGaussian
    assert row.queries_used == 3 * 2 + 1
    assert row.n_samples == 1
    assert row.estimate_stderr == 0.0
    assert row.empirical_var is None
    assert row.estimate_mean == pytest.approx(row.trace_true, rel=1e-8)


def test_run_config_rank_one_uses_one_query():
    (row,) = run_config(config(d=2, k=3, matrix="rank_one_seed:9"))
    assert row.queries_used == 1
    assert row.estimate_mean == pytest.approx(row.trace_true, rel=1e-10)


def test_run_config_dimension_over_budget():
    cfg = config(k=4, samples=(3, 1), distributions=("RealGaussian", "RealRademacher"))
    rows = run_config(cfg, Budgets(max_dimension=8))
    assert len(rows) == 4
    assert all(row.status == STATUS_BUDGET_SKIPPED for row in rows)
    assert all(row.estimate_mean is None for row in rows)


def test_run_config_subsets_over_budget():
    rows = run_config(config(samples=(10,)), Budgets(max_subsystems=1))
    (row,) = rows
    assert row.status == STATUS_BUDGET_SKIPPED
    assert row.exact_var is None
    assert row.estimate_mean is not None
    assert row.trace_true == 4


def test_run_config_complex_matrix_real_queries(tmp_path):
    path = tmp_path / "a.bin"
    write_dense_matrix(path, random_complex(2, 2, 1), dims(2, 2))
    (row,) = run_config(config(matrix=f"dense_file:{path}", samples=(10,)))
    assert row.exact_var is None
    assert row.status.startswith("error:")


def test_variance_band():
    trials = RngStream(3).generator().standard_normal(1000)
    empirical = float(np.var(trials, ddof=1))
    assert variance_band(trials, 1.0) > 0
    assert within_band(trials, empirical, 1.0, QueryDistribution.RealGaussian)
    assert not within_band(trials, empirical, 10.0, QueryDistribution.RealGaussian)
    # Rademacher formulas only bound from above
    assert within_band(trials, empirical, 10.0, QueryDistribution.RealRademacher)
    assert not within_band(trials, empirical, 0.1, QueryDistribution.RealRademacher)


def test_has_band_violation():
    rows = run_config(config(samples=(5,), mc_trials=20))
    assert not has_band_violation([])
    flagged = [replace(row, status=STATUS_BAND_VIOLATION) for row in rows]
    assert has_band_violation(rows + flagged)


def test_result_columns():
    assert len(RESULT_COLUMNS) == 17
    assert ROW_COLUMNS == RESULT_COLUMNS + ("status",)
