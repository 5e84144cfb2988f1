import json
import logging
from unittest.mock import patch

import pytest

from krontrace import __version__
from krontrace.cli import EXIT_UNHANDLED_EXCEPTION, main, setup_logging
from krontrace.exceptions import DegenerateQueryError, SysExitRecommendedError

from .utils import chdir

DEBUG_MSG = "DQCDVI"
INFO_MSG = "TDDJOG"
WARNING_MSG = "XLTCQQ"
ERROR_MSG = "PXVSNS"


def setup_logging_do_logging_and_capture(name, capsys, verbosity):
    setup_logging(verbosity)
    logger = logging.getLogger(name)
    logger.debug(DEBUG_MSG)
    logger.info(INFO_MSG)
    logger.warning(WARNING_MSG)
    logger.error(ERROR_MSG)
    return capsys.readouterr()


def assert_all_messages_logged(cwd):
    with open(cwd.join("krontrace.log"), "r", encoding="utf-8") as f:
        log = f.read()
    assert ERROR_MSG in log
    assert WARNING_MSG in log
    assert INFO_MSG in log
    assert DEBUG_MSG in log


def test_setup_logging_console_zero_verbosity(tmpdir, capsys):
    with chdir(tmpdir) as cwd:
        out, err = setup_logging_do_logging_and_capture("krontrace", capsys, 0)
    assert not out
    assert ERROR_MSG in err
    assert WARNING_MSG in err
    assert INFO_MSG not in err
    assert DEBUG_MSG not in err

    assert_all_messages_logged(cwd)


def test_setup_logging_console_one_verbosity(tmpdir, capsys):
    with chdir(tmpdir) as cwd:
        out, err = setup_logging_do_logging_and_capture("krontrace", capsys, 1)
    assert not out
    assert ERROR_MSG in err
    assert WARNING_MSG in err
    assert INFO_MSG in err
    assert DEBUG_MSG not in err

    assert_all_messages_logged(cwd)


def test_setup_logging_console_two_verbosity(tmpdir, capsys):
    with chdir(tmpdir) as cwd:
        out, err = setup_logging_do_logging_and_capture("krontrace", capsys, 2)
    assert not out
    assert ERROR_MSG in err
    assert WARNING_MSG in err
    assert INFO_MSG in err
    assert DEBUG_MSG in err

    assert_all_messages_logged(cwd)


def test_setup_logging_file_timestamps_are_utc(tmpdir, capsys):
    with chdir(tmpdir) as cwd:
        setup_logging_do_logging_and_capture("krontrace.test", capsys, 0)
    with open(cwd.join("krontrace.log"), "r", encoding="utf-8") as f:
        first = f.readline()
    # [2024-05-01T12:00:00Z] DEBUG ...
    assert first.startswith("[")
    assert "Z] " in first


def test_main_no_args_prints_help(tmpdir, capsys):
    with chdir(tmpdir):
        main(args_in=[])
    out, err = capsys.readouterr()
    assert not err
    assert "--help" in out
    for command in ("estimate", "variance", "recover", "bounds", "verify"):
        assert command in out


def test_main_version_arg_prints_version(tmpdir, capsys):
    with chdir(tmpdir):
        main(args_in=["--version"])
    out, err = capsys.readouterr()
    assert not err
    assert out == f"krontrace {__version__}\n"


def test_main_unhandled_exception_before_logging(capsys):
    with patch(
        "krontrace.cli.unittest_patch_setup_subparser",
        autospec=True,
        side_effect=Exception,
    ) as mock_hook:
        with pytest.raises(SystemExit) as excinfo:
            main(args_in=[])
    assert excinfo.value.code == EXIT_UNHANDLED_EXCEPTION
    mock_hook.assert_called_once()
    out, err = capsys.readouterr()
    assert not out
    assert "Unhandled exception" in err
    assert "Traceback" in err
    assert "krontrace.log" not in err


def patched_command(command):
    def setup_subparser(subparsers, parents):
        parser = subparsers.add_parser("fail", parents=parents)
        parser.set_defaults(command=command)

    return patch(
        "krontrace.cli.unittest_patch_setup_subparser",
        autospec=True,
        side_effect=setup_subparser,
    )


def test_main_unhandled_exception_after_logging(tmpdir, capsys):
    def raise_exception(_args):
        raise Exception  # pylint: disable=broad-exception-raised

    with chdir(tmpdir), patched_command(raise_exception) as mock_hook:
        with pytest.raises(SystemExit) as excinfo:
            main(args_in=["fail"])
    assert excinfo.value.code == EXIT_UNHANDLED_EXCEPTION
    mock_hook.assert_called_once()
    out, err = capsys.readouterr()
    assert not out
    assert "Unhandled exception" in err
    assert "Traceback" not in err
    assert "krontrace.log" in err


def test_main_sysexit_exception_after_logging(tmpdir, capsys):
    def raise_exception(_args):
        raise SysExitRecommendedError(ERROR_MSG)

    with chdir(tmpdir), patched_command(raise_exception) as mock_hook:
        with pytest.raises(SystemExit) as excinfo:
            main(args_in=["fail"])
    assert excinfo.value.code == 1
    mock_hook.assert_called_once()
    out, err = capsys.readouterr()
    assert not out
    assert ERROR_MSG in err


def test_main_library_error_after_logging(tmpdir, capsys):
    def raise_exception(_args):
        raise DegenerateQueryError("ignored") from Exception(ERROR_MSG)

    with chdir(tmpdir), patched_command(raise_exception) as mock_hook:
        with pytest.raises(SystemExit) as excinfo:
            main(args_in=["fail"])
    assert excinfo.value.code == 2
    mock_hook.assert_called_once()
    out, err = capsys.readouterr()
    assert not out
    assert "DegenerateQueryError" in err
    assert ERROR_MSG in err
    assert "Traceback" not in err
    assert "krontrace.log" in err


def test_main_estimate_writes_csv(tmpdir, capsys):
    with chdir(tmpdir):
        main(
            args_in=[
                "estimate",
                "--d",
                "2",
                "--k",
                "2",
                "--matrix",
                "wishart_seed:3",
                "--samples",
                "10",
                "20",
                "--mc-trials",
                "200",
                "--eps",
                "0.1",
            ]
        )
    out, _err = capsys.readouterr()
    lines = out.splitlines()
    assert lines[0].startswith("experiment_id,d,k,field,dist,")
    assert len(lines) == 3
    assert all(len(line.split(",")) == 17 for line in lines)


def test_main_estimate_invalid_matrix_exits_one(tmpdir, capsys):
    with chdir(tmpdir):
        with pytest.raises(SystemExit) as excinfo:
            main(args_in=["estimate", "--matrix", "wishart_seed:abc"])
    assert excinfo.value.code == 1
    _out, err = capsys.readouterr()
    assert "needs an integer seed" in err


def test_main_estimate_band_violation_exits_one(tmpdir, capsys):
    with chdir(tmpdir), patch(
        "krontrace.estimate.has_band_violation", autospec=True, return_value=True
    ):
        with pytest.raises(SystemExit) as excinfo:
            main(args_in=["estimate", "--samples", "5", "--mc-trials", "50"])
    assert excinfo.value.code == 1
    out, _err = capsys.readouterr()
    # rows are still written before the run fails
    assert out.startswith("experiment_id,")


def test_main_variance_all_ones(tmpdir, capsys):
    with chdir(tmpdir):
        main(
            args_in=[
                "variance",
                "--matrix",
                "all_ones",
                "--field",
                "complex",
                "--dist",
                "RealGaussian",
                "ComplexGaussian",
                "--oracle",
                "--eps",
                "0.1",
            ]
        )
    out, _err = capsys.readouterr()
    real, complex_ = json.loads(out)
    assert real["variance"] == pytest.approx(128)
    assert real["oracle_variance"] == pytest.approx(128)
    assert real["required_samples"] == 800
    assert complex_["variance"] == pytest.approx(48)
    assert complex_["oracle_variance"] == pytest.approx(48)
    assert real["psd_worst_case"] == pytest.approx(9 * 16)


def test_main_recover_writes_factors(tmpdir, capsys):
    with chdir(tmpdir) as cwd:
        main(args_in=["recover", "--matrix", "wishart_seed:5", "--out", "factors.json"])
        with open(cwd.join("factors.json"), "r", encoding="utf-8") as f:
            written = json.load(f)
    out, _err = capsys.readouterr()
    document = json.loads(out)
    assert document["queries_used"] == 5
    assert document["trace"] == pytest.approx(document["trace_true"], rel=1e-8)
    assert written["factors"] == document["factors"]


def test_main_recover_from_config(tmpdir, capsys):
    with chdir(tmpdir) as cwd:
        with open(cwd.join("experiment.json"), "w", encoding="utf-8") as f:
            json.dump({"d": 3, "k": 2, "matrix": "wishart_seed:2", "seed": 4}, f)
        main(args_in=["recover", "--config", "experiment.json", "--d", "5"])
    out, _err = capsys.readouterr()
    document = json.loads(out)
    assert document["matrix"] == "wishart_seed:2"
    assert document["queries_used"] == 3 * 2 + 1
    assert len(document["factors"]) == 2
    assert document["trace"] == pytest.approx(document["trace_true"], rel=1e-8)


def test_main_bounds_prints_table(tmpdir, capsys):
    with chdir(tmpdir):
        main(args_in=["bounds", "--d", "2", "--k", "2", "--eps", "0.1"])
    out, _err = capsys.readouterr()
    assert "d=2, k=2" in out
    # ((3 - 2/2)^2 - 1) / 0.01
    assert "300" in out
    # 92 after one query per factor
    assert "q=1  92" in out
