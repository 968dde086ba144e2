import subprocess
import sys
from pathlib import Path

import pytest

from hexrelay.cli import (
    CSV_HEADER,
    EXIT_CHECK,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    emit_csv,
    main,
    parse_args,
    read_config_file,
    replay_example,
)
from hexrelay.netmodel import Strategy
from hexrelay.simengine import SWEEP_MUS, SimConfig, SweepRow

SMALL = ["--cells", "7", "--slots", "150", "--energy", "100", "--capacity", "5"]


def test_parse_sweep_defaults(tmp_path):
    spec = parse_args(["--mode", "sweep", "--seed", "42", "--out", str(tmp_path / "r.csv")])
    assert spec.mode == "sweep" and spec.trials == 10
    assert spec.config == SimConfig(seed=42)
    assert spec.out == tmp_path / "r.csv"


def test_parse_trial():
    spec = parse_args(["--strategy", "eb-mu", "--mus", "400", "--mode", "trial"])
    assert spec.mode == "trial" and spec.trials == 1
    assert spec.config.strategy is Strategy.EB_BY_MU and spec.config.n_mus == 400


def test_parse_every_flag():
    spec = parse_args(["--mus", "10", "--cells", "7", "--slots", "5", "--seed", "3",
                       "--eps", "0.5", "--hot-weight", "2", "--p-idle", "0.2",
                       "--p-session", "2", "--energy", "50", "--capacity", "4", "--rate", "2",
                       "--start-prob", "0.1", "--mean-len", "3", "--strategy", "no-eb"])
    assert spec.config == SimConfig(n_mus=10, n_cells=7, horizon=5, seed=3, eps=0.5,
                                    hot_cell_weight=2.0, p_idle=0.2, p_session=2.0,
                                    initial_energy=50.0, capacity=4, rate=2.0,
                                    session_start_prob=0.1, mean_session_len=3.0,
                                    strategy=Strategy.NO_EB)


@pytest.mark.parametrize("argv", [
    ["--mus", "-5"], ["--mus", "many"], ["--bogus"], ["--mode", "fast"],
    ["--strategy", "best"], ["--trials", "0"], ["--start-prob", "2"],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(UsageError):
        parse_args(argv)
    assert main(argv) == EXIT_USAGE
    assert "hexrelay:" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# scarce run\nn_mus = 30\nenergy=80   # flag name works too\n"
                   "strategy = eb-bs\n\nhot_cell_weight = 3\n", encoding="utf-8")
    assert read_config_file(cfg) == {"n_mus": 30, "initial_energy": 80.0,
                                     "strategy": Strategy.EB_BY_BS, "hot_cell_weight": 3.0}
    spec = parse_args(["--config", str(cfg), "--mus", "40"])
    assert spec.config.n_mus == 40
    assert spec.config.initial_energy == 80.0
    assert spec.config.strategy is Strategy.EB_BY_BS


@pytest.mark.parametrize("text", ["colour = red\n", "n_mus\n", "n_mus = ten\n",
                                  "strategy = greedy\n"])
def test_config_file_errors(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text, encoding="utf-8")
    with pytest.raises(UsageError):
        parse_args(["--config", str(cfg)])
    assert main(["--config", str(cfg)]) == EXIT_USAGE


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.cfg")]) == EXIT_USAGE


def _row(n, s, x):
    return SweepRow(n, s, x, x / 10, 1000.0 + x, 0.0, 3.0, 10)


def test_emit_csv_format(tmp_path):
    rows = [_row(250, Strategy.NO_EB, 1.23456789), _row(200, Strategy.EB_BY_MU, 12345678.9),
            _row(200, Strategy.EB_BY_BS, 0.5)]
    out = tmp_path / "t.csv"
    emit_csv(rows, out)
    data = out.read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")
    lines = data.decode().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[0] == "n_mus,strategy,throughput_mean,throughput_std,lifetime_mean,lifetime_std,blocked_mean"
    assert [l.split(",")[:2] for l in lines[1:]] == [["200", "eb-bs"], ["200", "eb-mu"], ["250", "no-eb"]]
    assert lines[2] == "200,eb-mu,1.23457e+07,1.23457e+06,1.23467e+07,0,3"
    assert lines[3] == "250,no-eb,1.23457,0.123457,1001.23,0,3"


def test_emit_csv_empty(tmp_path):
    out = tmp_path / "e.csv"
    emit_csv([], out)
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"


def test_replay_example_default():
    rep = replay_example()
    assert rep.selected == 2
    assert rep.predictions[1] == pytest.approx(7400 / 13)
    assert rep.predictions[2] == pytest.approx(770.0)
    assert rep.predictions[3] == pytest.approx(9050 / 13)
    text = "\n".join(rep.lines())
    assert "selected R2" in text


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.5, 5.0])
def test_replay_example_eps(eps):
    assert replay_example(eps).selected == 2


def test_replay_example_tie():
    hist = {1: (100.0, 90.0), 2: (100.0, 90.0), 3: (100.0, 90.0)}
    assert replay_example(histories=hist).selected == 1


def test_replay_example_exit_codes(capsys):
    assert main(["--mode", "replay-example"]) == EXIT_OK
    assert "selected R2" in capsys.readouterr().out
    assert main(["--mode", "replay-example", "--eps", "5"]) == EXIT_OK


def test_replay_example_check_failure(monkeypatch):
    from hexrelay import cli
    monkeypatch.setitem(cli.EXAMPLE_HISTORIES, 2, (900.0, 700.0, 500.0, 300.0))
    assert main(["--mode", "replay-example"]) == EXIT_CHECK


def test_trial_mode_writes_one_row(tmp_path, capsys):
    out = tmp_path / "trial.csv"
    assert main(["--mode", "trial", "--strategy", "no-eb", "--mus", "60", *SMALL,
                 "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("60,no-eb,")
    assert "throughput=" in capsys.readouterr().out


def test_sweep_mode_rows_and_summary(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["--mode", "sweep", "--trials", "1", *SMALL, "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 3 * len(SWEEP_MUS) == 40
    stdout = capsys.readouterr().out
    assert stdout.count("throughput best=") == len(SWEEP_MUS)


def test_unwritable_output(tmp_path, capsys):
    target = tmp_path / "missing-dir" / "x.csv"
    code = main(["--mode", "trial", "--mus", "20", *SMALL, "--out", str(target)])
    assert code == EXIT_IO
    assert "cannot write" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run([sys.executable, "-m", "hexrelay", "--mode", "replay-example"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "selected R2" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "hexrelay", "--mus", "-5"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert not Path(out).exists()
