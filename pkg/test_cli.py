"""
Tests for the command-line interface
"""
import pytest

from cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, build_config, main, parse_command
from metric_log import CSV_COLUMNS, read_csv
from models import Nonlinearity, Subcommand, Variant

SMALL_RUN = ["--eta-w1", "0.01", "--eta-w2", "0.01", "--eta-q", "0.02", "--t0", "2000",
             "--steps", "200", "--eval-every", "100"]


def test_oracle_prints_optimal_loss(capsys):
    assert main(["oracle", "--dataset", "synth", "--k", "4"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "optimal_loss" in out
    assert "rank_ok        True" in out


def test_train_writes_metric_log(tmp_path):
    out = tmp_path / "run.csv"
    assert main(["train", "--variant", "bmvr", *SMALL_RUN, "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert [row.step for row in read_csv(out)["run"].rows] == [0, 100, 200]


def test_train_without_rates_is_a_config_error(tmp_path, capsys):
    code = main(["train", "--steps", "10", "--out", str(tmp_path / "run.csv")])
    assert code == EXIT_CONFIG
    assert "--eta-w1 is required" in capsys.readouterr().out


def test_real_dataset_needs_a_data_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("BMVR_DATA_DIR", raising=False)
    code = main(["train", "--dataset", "mnist", "--preset", "linear-mnist",
                 "--out", str(tmp_path / "run.csv")])
    assert code == EXIT_CONFIG
    assert "--data-dir" in capsys.readouterr().out


def test_unknown_flag_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main(["train", "--learning-rate", "0.1"])
    assert info.value.code == 2


def test_preset_with_overrides():
    command = parse_command(["train", "--preset", "relu-mnist-k64", "--steps", "50", "--seed", "4"])
    assert command.subcommand == Subcommand.TRAIN
    config = build_config(command.flags, Variant(command.flags["variant"]))
    assert config.k == 64
    assert config.nonlinearity == Nonlinearity.RELU
    assert (config.eta_w1.eta0, config.eta_w2.eta0, config.eta_q.eta0) == (0.001, 0.0002, 0.001)
    assert (config.steps, config.seed) == (50, 4)


def test_table_preset_names(tmp_path):
    command = parse_command(["train", "--preset", "table3-k64"])
    config = build_config(command.flags, Variant.BMVR)
    assert (config.eta_w1.eta0, config.eta_w2.eta0, config.eta_q.eta0) == (0.001, 0.0002, 0.001)
    assert config.k == 64

    out = tmp_path / "run.csv"
    code = main(["train", "--variant", "bmvr", "--preset", "table3-k64", "--dataset", "synth",
                 "--k", "4", "--steps", "20", "--eval-every", "10", "--out", str(out)])
    assert code == EXIT_OK
    assert [row.step for row in read_csv(out)["run"].rows] == [0, 10, 20]


def test_divergence_exit_code(tmp_path, capsys):
    checkpoint = tmp_path / "model.bmvr"
    code = main(["train", "--variant", "backprop", "--eta-w1", "5", "--eta-w2", "5",
                 "--steps", "2000", "--eval-every", "10", "--out", str(tmp_path / "run.csv"),
                 "--checkpoint", str(checkpoint)])
    assert code == EXIT_DIVERGED
    out = capsys.readouterr().out
    assert "[ERROR]" in out
    assert f"last good checkpoint: {checkpoint}" in out
    assert checkpoint.exists()


def test_diagnose_a_trained_checkpoint(tmp_path, capsys):
    checkpoint = tmp_path / "model.bmvr"
    assert main(["train", *SMALL_RUN, "--out", str(tmp_path / "run.csv"),
                 "--checkpoint", str(checkpoint)]) == EXIT_OK
    capsys.readouterr()

    out = tmp_path / "diagnose.csv"
    assert main(["diagnose", "--checkpoint", str(checkpoint), "--out", str(out)]) == EXIT_OK
    assert "saturation gap" in capsys.readouterr().out
    header, values = out.read_text().splitlines()
    assert header.startswith("objective,upper_bound_objective,tightness_ratio")
    assert len(values.split(",")) == len(header.split(","))


def test_diagnose_missing_checkpoint(tmp_path):
    assert main(["diagnose", "--checkpoint", str(tmp_path / "absent.bmvr")]) == EXIT_CONFIG


def test_compare_writes_csv_and_svg(tmp_path):
    out = tmp_path / "compare.csv"
    code = main(["compare", "--preset", "default-synth", "--steps", "200", "--eval-every", "100",
                 "--out", str(out)])
    assert code == EXIT_OK
    logs = read_csv(out)
    assert list(logs) == ["bmvr", "backprop"]
    assert logs["bmvr"].rows[0].objective_mean == logs["backprop"].rows[0].objective_mean
    assert (tmp_path / "compare.svg").read_text().lstrip().startswith("<?xml")


def test_plot_is_reproducible(tmp_path):
    run = tmp_path / "run.csv"
    assert main(["train", *SMALL_RUN, "--out", str(run)]) == EXIT_OK
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(["plot", str(run), "--out", str(first), "--log-y"]) == EXIT_OK
    assert main(["plot", str(run), "--out", str(second), "--log-y"]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
