import pytest

from servoland import cli
from servoland.harness import SimulationInvariantError


def test_run_writes_outputs(tmp_path, capsys):
    assert cli.main(["run", "--seed", "0", "--out", str(tmp_path)]) == 0
    assert "Landed" in capsys.readouterr().out
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "trace_seed0.csv").exists()
    assert (tmp_path / "trace_seed0_trajectory.png").exists()


def test_plot_subcommand(tmp_path):
    assert cli.main(["run", "--seed", "2", "--out", str(tmp_path), "--no-plots"]) == 0
    assert not list(tmp_path.glob("*.png"))
    assert cli.main(["plot", "--trace", str(tmp_path / "trace_seed2.csv")]) == 0
    assert len(list(tmp_path.glob("*.png"))) == 3


def test_mc_subcommand(tmp_path, capsys):
    code = cli.main(["mc", "--runs", "2", "--workers", "1", "--out", str(tmp_path)])
    assert code == 0
    assert "landing rate: 1.000" in capsys.readouterr().out
    assert len((tmp_path / "summary.csv").read_text().splitlines()) == 3


@pytest.mark.parametrize(
    "toml",
    ["[mission]\nfoo = 1\n", "[sim]\ndt = -1.0\n", "seed = = 2\n"],
)
def test_config_errors_exit_2(tmp_path, toml, capsys):
    p = tmp_path / "c.toml"
    p.write_text(toml)
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_and_bad_runs_exit_2(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == 2
    assert cli.main(["mc", "--runs", "0"]) == 2


def test_invariant_violation_exits_3(tmp_path, monkeypatch, capsys):
    def boom(cfg, seed):
        raise SimulationInvariantError("non-finite UAV state at t=1.000")

    monkeypatch.setattr(cli, "run_scenario", boom)
    assert cli.main(["run", "--out", str(tmp_path)]) == 3
    assert "invariant" in capsys.readouterr().err


def test_plot_rejects_foreign_csv(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    assert cli.main(["plot", "--trace", str(p)]) == 1
