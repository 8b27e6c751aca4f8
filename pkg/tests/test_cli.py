import csv
import json
import subprocess
import sys

import pytest

from marginlp.cli import main, parse_leverages, parse_window
from marginlp.errors import MarginLiquidityError
from marginlp.market_data import align
from synthetic import flat_leg, oscillating_market, write_market


@pytest.fixture
def data(tmp_path):
    paths = write_market(oscillating_market(days=1), tmp_path)
    return ["--pair", str(paths["pair"]), "--x-usd", str(paths["x_usd"]), "--y-usd", str(paths["y_usd"])]


class TestBacktest:
    def test_happy_path(self, data, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["backtest", *data, "--out", str(out)]) == 0
        assert {p.name for p in out.iterdir()} == {"report.json", "equity.csv", "trades.csv"}
        assert "sharpe=" in capsys.readouterr().out

    def test_config_file(self, data, tmp_path):
        out = tmp_path / "cfg_run"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"pair": data[1], "x_usd": data[3], "y_usd": data[5], "output_dir": str(out), "window": "1h"}))
        assert main(["backtest", "--config", str(cfg)]) == 0
        assert (out / "report.json").exists()

    def test_idempotent(self, data, tmp_path):
        out = tmp_path / "run"
        main(["backtest", *data, "--out", str(out)])
        first = (out / "report.json").read_bytes()
        main(["backtest", *data, "--out", str(out)])
        assert (out / "report.json").read_bytes() == first

    def test_missing_file(self, data, tmp_path, capsys):
        missing = str(tmp_path / "nope.csv")
        data[1] = missing
        assert main(["backtest", *data, "--out", str(tmp_path / "o")]) == 2
        assert missing in capsys.readouterr().err

    def test_alpha_above_beta(self, data, tmp_path, capsys):
        assert main(["backtest", *data, "--alpha", "0.3", "--beta", "0.2", "--out", str(tmp_path / "o")]) == 1
        assert "alpha < beta" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"lev": 3}')
        assert main(["backtest", "--config", str(cfg)]) == 1
        assert "lev" in capsys.readouterr().err


class TestSweep:
    def test_summary(self, data, tmp_path):
        out = tmp_path / "sweep"
        assert main(["sweep", *data, "--leverages", "3,10", "--out", str(out)]) == 0
        with (out / "summary.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["leverage", "sharpe", "mdd", "ror"]
        assert [r[0] for r in rows[1:]] == ["3", "10"]
        assert (out / "leverage_3" / "report.json").exists()

    def test_parallel_matches_sequential(self, data, tmp_path):
        main(["sweep", *data, "--leverages", "3,10", "--out", str(tmp_path / "a")])
        main(["sweep", *data, "--leverages", "3,10", "--jobs", "2", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
        for lev in ("3", "10"):
            a = (tmp_path / "a" / f"leverage_{lev}" / "report.json").read_bytes()
            assert a == (tmp_path / "b" / f"leverage_{lev}" / "report.json").read_bytes()

    @pytest.mark.parametrize("levs", ["", "3,1", "abc"])
    def test_bad_leverages(self, data, tmp_path, levs):
        assert main(["sweep", *data, "--leverages", levs, "--out", str(tmp_path / "o")]) == 1


class TestBaseline:
    def test_happy_path(self, data, tmp_path):
        out = tmp_path / "base"
        assert main(["baseline", *data, "--out", str(out)]) == 0
        assert json.loads((out / "report.json").read_text())["trades"] == []

    def test_missing_file(self, data, tmp_path):
        data[3] = str(tmp_path / "nope.csv")
        assert main(["baseline", *data, "--out", str(tmp_path / "o")]) == 2

    def test_bad_config(self, data, tmp_path):
        assert main(["baseline", *data, "--gamma", "2", "--out", str(tmp_path / "o")]) == 1


class TestEfficiency:
    def test_default_grid(self, tmp_path):
        assert main(["efficiency", "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "efficiency.csv").read_text().splitlines()
        assert rows[0] == "ratio,concentrated,margin"
        assert len(rows) == 101

    def test_ratio_16_row(self, tmp_path):
        assert main(["efficiency", "--rmin", "2", "--rmax", "128", "--points", "7", "--out", str(tmp_path)]) == 0
        with (tmp_path / "efficiency.csv").open() as fh:
            rows = [[float(v) for v in r] for r in list(csv.reader(fh))[1:]]
        row = next(r for r in rows if abs(r[0] - 16) < 1e-9)
        assert row[1:] == pytest.approx([2, 5], rel=1e-9)

    def test_rmin_at_one(self, tmp_path):
        assert main(["efficiency", "--rmin", "1", "--out", str(tmp_path)]) == 1


class TestValidate:
    def test_clean(self, data, capsys):
        assert main(["validate", *data]) == 0
        assert "WARNING" not in capsys.readouterr().out

    def test_corrupt_row(self, data, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        # second candle has high below open
        bad.write_text("open_time,open,high,low,close,volume\n0,1,1,1,1,1\n300000,1,0.5,0.5,0.5,1\n")
        data[1] = str(bad)
        assert main(["validate", *data]) == 1
        assert "row 3" in capsys.readouterr().err

    def test_incoherent(self, tmp_path, capsys):
        market = align(flat_leg(5, 0.06), flat_leg(5, 40000.0), flat_leg(5, 2000.0))
        paths = write_market(market, tmp_path)
        args = ["--pair", str(paths["pair"]), "--x-usd", str(paths["x_usd"]), "--y-usd", str(paths["y_usd"])]
        assert main(["validate", *args]) == 0
        assert "WARNING" in capsys.readouterr().out


class TestParsing:
    @pytest.mark.parametrize("text, seconds", [("2h", 7200), ("30m", 1800), ("1d", 86400), ("90s", 90), ("500ms", 0.5), ("45", 45)])
    def test_window(self, text, seconds):
        assert parse_window(text).total_seconds() == seconds

    def test_bad_window(self):
        with pytest.raises(MarginLiquidityError):
            parse_window("two hours")

    def test_leverages(self):
        assert parse_leverages("3, 10,100") == [3, 10, 100]


@pytest.mark.parametrize("command", ["backtest", "sweep", "baseline"])
def test_help_documents_defaults(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    text = " ".join(capsys.readouterr().out.split())
    for default in ("(default: 0.1)", "(default: 0.2)", "(default: 0.05)", "(default: 2h)", "(default: 0.0015)"):
        assert default in text


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "marginlp", "efficiency", "--points", "3", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "efficiency.csv").exists()
