import json

import pytest

from intraday_alpha import cli
from intraday_alpha.cli import main
from intraday_alpha.config import RunConfig, load_config, parse_config_text
from intraday_alpha.errors import ConfigError, NonFiniteLoss
from intraday_alpha.market_data import load_panel


@pytest.fixture(scope="module")
def panel_path(tmp_path_factory):
    d = tmp_path_factory.mktemp("panel")
    p = d / "panel.csv"
    assert main(["synth", "--n-stocks", "12", "--n-years", "5", "--seed", "3", "--out", str(p)]) == 0
    return p


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, panel_path):
    out = tmp_path_factory.mktemp("run")
    cfg = out / "run.cfg"
    cfg.write_text(f"panel = {panel_path}\nn_trees = 5\nk = 3\nseed = 2\nrolling_window = 50\n")
    assert main(["backtest", "--config", str(cfg), "--out", str(out), "--save-models", "true"]) == 0
    return out


def test_synth_deterministic(tmp_path, panel_path):
    other = tmp_path / "again.csv"
    assert main(["synth", "--n-stocks", "12", "--n-years", "5", "--seed", "3", "--out", str(other)]) == 0
    assert other.read_bytes() == panel_path.read_bytes()
    panel = load_panel(other)
    assert panel.n_stocks == 12 and panel.n_days == 5 * 252


def test_backtest_artifacts(run_dir):
    for name in ("returns.csv", "legs.csv", "report.json", "report.csv", "timing.json", "wealth.csv",
                 "rolling_mean.csv", "rolling_sharpe.csv", "config.cfg"):
        assert (run_dir / name).is_file(), name
    assert sorted(p.name for p in (run_dir / "models").iterdir()) == ["period_00.json", "period_01.json"]
    rep = json.loads((run_dir / "report.json").read_text())
    assert set(rep) == {"gross", "net"}
    assert rep["gross"]["n_days"] == 5 * 252 - 756
    timing = json.loads((run_dir / "timing.json").read_text())
    assert len(timing["periods"]) == 2
    assert all(p["fit_seconds"] >= 0 and p["decision_seconds_per_day"] >= 0 for p in timing["periods"])
    wealth = (run_dir / "wealth.csv").read_text().splitlines()
    assert wealth[0] == "date,gross_wealth,net_wealth" and len(wealth) == rep["gross"]["n_days"] + 1
    rolling = (run_dir / "rolling_sharpe.csv").read_text().splitlines()
    assert len(rolling) == rep["gross"]["n_days"] - 50 + 2


def test_backtest_is_deterministic(tmp_path, panel_path, run_dir):
    cfg = run_dir / "run.cfg"
    assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    for name in ("returns.csv", "report.json", "legs.csv", "wealth.csv"):
        assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes()


def test_report_full_range_identical(tmp_path, run_dir):
    assert main(["report", str(run_dir / "returns.csv"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").read_bytes() == (run_dir / "report.json").read_bytes()


def test_report_three_way_split(tmp_path, run_dir):
    dates = [l.split(",")[0] for l in (run_dir / "returns.csv").read_text().splitlines()[1:]]
    cuts = [(None, dates[99]), (dates[100], dates[299]), (dates[300], None)]
    total = 0
    for i, (a, b) in enumerate(cuts):
        args = ["report", str(run_dir / "returns.csv"), "--out", str(tmp_path / str(i))]
        args += ["--start", a] if a else []
        args += ["--end", b] if b else []
        assert main(args) == 0
        total += json.loads((tmp_path / str(i) / "report.json").read_text())["gross"]["n_days"]
    assert total == len(dates)


def test_report_single_day_is_error(tmp_path, run_dir, capsys):
    d = (run_dir / "returns.csv").read_text().splitlines()[5].split(",")[0]
    assert main(["report", str(run_dir / "returns.csv"), "--start", d, "--end", d, "--out", str(tmp_path)]) == 1
    assert "at least 2" in capsys.readouterr().err


def test_window_not_longer_than_train_fails_before_compute(tmp_path, panel_path, capsys):
    rc = main(["backtest", "--panel", str(panel_path), "--window_days", "756", "--out", str(tmp_path / "x")])
    assert rc == 1
    assert not (tmp_path / "x").exists()
    assert "window_days" in capsys.readouterr().err


@pytest.mark.parametrize("args", [["--panel", "missing.csv"], ["--n_trees", "many"], ["--model", "svm"]])
def test_invalid_inputs(tmp_path, panel_path, args):
    base = ["backtest", "--out", str(tmp_path)]
    if "--panel" not in args:
        base += ["--panel", str(panel_path)]
    try:
        rc = main(base + args)
    except SystemExit as exc:  # argparse rejects unknown choices itself
        rc = exc.code
    assert rc != 0


def test_short_calendar_is_validation_error(tmp_path):
    bad = tmp_path / "short.csv"
    assert main(["synth", "--n-stocks", "3", "--n-years", "3", "--out", str(bad)]) == 0
    # 756 days cannot hold one 1008-day window
    assert main(["backtest", "--panel", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_runtime_failure_exit_code(tmp_path, panel_path, monkeypatch, capsys):
    def explode(*args, **kwargs):
        raise NonFiniteLoss("training loss became nan in epoch 3")

    monkeypatch.setattr(cli, "run_backtest", explode)
    assert main(["backtest", "--panel", str(panel_path), "--out", str(tmp_path)]) == 2
    assert "NonFiniteLoss" in capsys.readouterr().err


def test_dump_features(tmp_path, panel_path):
    out = tmp_path / "f.csv"
    assert main(["dump-features", "--panel", str(panel_path), "--out", str(out), "--period", "1"]) == 0
    lines = out.read_text().splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["ticker", "date", "ir_1"] and len(header) == 95
    assert len(lines) - 1 == 12 * (1260 - 252 - 241)


def test_config_parsing():
    vals = parse_config_text("# comment\nn_trees = 12  # inline\nmodel=lstm\nskip-degenerate-days = yes\nend = none\n")
    assert vals == {"n_trees": 12, "model": "lstm", "skip_degenerate_days": True, "end": None}
    with pytest.raises(ConfigError):
        parse_config_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("k = 1\nk = 2\n")
    with pytest.raises(ConfigError):
        parse_config_text("just words\n")


def test_cli_overrides_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n_trees = 12\nseed = 3\n")
    rc = load_config(cfg, {"seed": 9})
    assert rc.n_trees == 12 and rc.seed == 9
    spec = rc.classifier_spec()
    assert spec.seed == 9 and spec.n_trees == 12


def test_config_text_round_trip(tmp_path):
    rc = RunConfig(panel="x.csv", n_trees=7, skip_degenerate_days=True)
    (tmp_path / "c.cfg").write_text(rc.to_text())
    assert load_config(tmp_path / "c.cfg") == rc


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig().validate()
    with pytest.raises(ConfigError):
        RunConfig(panel="p", start="2020-02-30").validate(check_paths=False)
    with pytest.raises(ConfigError):
        RunConfig(panel="p", start="2021-01-01", end="2020-01-01").validate(check_paths=False)
    RunConfig(panel="p").validate(check_paths=False)
