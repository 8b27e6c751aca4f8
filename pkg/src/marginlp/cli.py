"""Command-line entry point.

Subcommands: ``backtest``, ``sweep``, ``baseline``, ``efficiency``, ``validate``.
Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from datetime import timedelta
from pathlib import Path

from marginlp.backtest import BacktestReport, run_backtest, run_baseline_hold
from marginlp.efficiency import efficiency_curve
from marginlp.errors import MarginLiquidityError
from marginlp.market_data import AlignedMarket, align, coherence_check, load_ohlcv
from marginlp.metrics import DEFAULT_RISK_FREE
from marginlp.strategy import StrategyConfig

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

_DEFAULTS = StrategyConfig()
_UNITS = {"ms": 0.001, "s": 1, "m": 60, "h": 3600, "d": 86400}


class ConfigError(MarginLiquidityError, ValueError):
    pass


def parse_window(value) -> timedelta:
    """``"2h"``, ``"30m"``, ``"1d"``, ``"90s"`` or a bare number of seconds."""
    if isinstance(value, timedelta):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return timedelta(seconds=value)
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*(ms|s|m|h|d)?\s*", str(value))
    if not m:
        raise ConfigError(f"cannot parse window {value!r}; use e.g. '2h', '30m', '1d'")
    return timedelta(seconds=float(m.group(1)) * _UNITS[m.group(2) or "s"])


@dataclass
class RunConfig:
    pair: str = ""
    x_usd: str = ""
    y_usd: str = ""
    alpha: float = _DEFAULTS.alpha
    beta: float = _DEFAULTS.beta
    gamma: float = _DEFAULTS.gamma
    leverage: float = _DEFAULTS.leverage
    window: str = "2h"
    fee_fraction: float = _DEFAULTS.fee_fraction
    initial_equity_usd: float = 10_000.0
    risk_free_annual: float = DEFAULT_RISK_FREE
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def strategy(self, leverage: float | None = None) -> StrategyConfig:
        return StrategyConfig(
            alpha=float(self.alpha),
            beta=float(self.beta),
            gamma=float(self.gamma),
            leverage=float(self.leverage if leverage is None else leverage),
            window=parse_window(self.window),
            fee_fraction=float(self.fee_fraction),
        )

    def validate(self) -> None:
        missing = [k for k in ("pair", "x_usd", "y_usd") if not getattr(self, k)]
        if missing:
            raise ConfigError(f"missing data paths: {', '.join(missing)}")
        if not float(self.initial_equity_usd) > 0:
            raise ConfigError("initial_equity_usd must be positive")
        self.strategy()


def load_run_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
    cfg = RunConfig.from_dict(data)
    overrides = {
        "pair": args.pair,
        "x_usd": args.x_usd,
        "y_usd": args.y_usd,
        "output_dir": args.out,
    }
    for name in ("alpha", "beta", "gamma", "leverage", "window", "fee_fraction", "initial_equity_usd", "risk_free_annual"):
        overrides[name] = getattr(args, name, None)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def load_market(cfg: RunConfig) -> AlignedMarket:
    return align(load_ohlcv(cfg.pair), load_ohlcv(cfg.x_usd), load_ohlcv(cfg.y_usd))


def _format_leverage(lev: float) -> str:
    return f"{lev:g}"


def _sweep_one(args) -> BacktestReport:
    market, strategy, equity, rf = args
    return run_backtest(market, strategy, equity, rf)


def cmd_backtest(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    cfg.validate()
    market = load_market(cfg)
    report = run_backtest(market, cfg.strategy(), float(cfg.initial_equity_usd), float(cfg.risk_free_annual))
    report.write(cfg.output_dir)
    print(report.summary_line())
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    cfg.validate()
    market = load_market(cfg)
    report = run_baseline_hold(market, float(cfg.initial_equity_usd), float(cfg.risk_free_annual))
    report.write(cfg.output_dir)
    print(report.summary_line())
    return EXIT_OK


def parse_leverages(text: str) -> list[float]:
    try:
        levs = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse leverage list {text!r}") from None
    if not levs:
        raise ConfigError("leverage list is empty")
    bad = [v for v in levs if not v > 1]
    if bad:
        raise ConfigError(f"every leverage must exceed 1, got {bad}")
    return levs


def cmd_sweep(args: argparse.Namespace) -> int:
    levs = parse_leverages(args.leverages)
    cfg = load_run_config(args)
    cfg.validate()
    strategies = [cfg.strategy(lev) for lev in levs]
    market = load_market(cfg)
    jobs = [(market, s, float(cfg.initial_equity_usd), float(cfg.risk_free_annual)) for s in strategies]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_sweep_one, jobs))
    else:
        reports = [_sweep_one(j) for j in jobs]

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["leverage", "sharpe", "mdd", "ror"])
        for lev, report in zip(levs, reports):
            report.write(out / f"leverage_{_format_leverage(lev)}")
            sharpe = repr(report.sharpe) if math.isfinite(report.sharpe) else "undefined"
            w.writerow([_format_leverage(lev), sharpe, repr(report.mdd), repr(report.ror)])
            print(f"leverage={_format_leverage(lev)} {report.summary_line()}")
    return EXIT_OK


def cmd_efficiency(args: argparse.Namespace) -> int:
    rows = efficiency_curve(args.rmin, args.rmax, args.points)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "efficiency.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ratio", "concentrated", "margin"])
        for row in rows:
            w.writerow([repr(v) for v in row])
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    missing = [k for k in ("pair", "x_usd", "y_usd") if not getattr(cfg, k)]
    if missing:
        raise ConfigError(f"missing data paths: {', '.join(missing)}")
    series = {}
    for name in ("pair", "x_usd", "y_usd"):
        series[name] = load_ohlcv(getattr(cfg, name))
        print(f"{name}: {len(series[name])} candles OK ({getattr(cfg, name)})")
    market = align(series["pair"], series["x_usd"], series["y_usd"])
    print(f"aligned: {len(market)} candles, dropped {market.dropped}")
    median, flagged = coherence_check(market)
    print(f"cross-rate deviation |p - p_y/p_x|/p: median {median:.6f}")
    if flagged:
        print(f"WARNING: median cross-rate deviation {median:.2%} exceeds 1%; pair and USD legs look incoherent")
    return EXIT_OK


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config with flat RunConfig keys")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--pair", help="CSV of the pair price (Y quoted in X)")
    p.add_argument("--x-usd", dest="x_usd", help="CSV of X in USD")
    p.add_argument("--y-usd", dest="y_usd", help="CSV of Y in USD")


def _add_strategy_args(p: argparse.ArgumentParser, leverage: bool = True) -> None:
    d = _DEFAULTS
    p.add_argument("--alpha", type=float, help=f"open when |slope| <= alpha (default: {d.alpha})")
    p.add_argument("--beta", type=float, help=f"close when |slope| > beta (default: {d.beta})")
    p.add_argument("--gamma", type=float, help=f"stop loss as a fraction of entry equity (default: {d.gamma})")
    if leverage:
        p.add_argument("--leverage", type=float, help=f"leverage l > 1 (default: {d.leverage:g})")
    p.add_argument("--window", help="trend window, e.g. 2h, 30m, 1d (default: 2h)")
    p.add_argument("--fee-fraction", dest="fee_fraction", type=float, help=f"swap fee 1 - phi (default: {d.fee_fraction})")
    p.add_argument("--initial-equity", dest="initial_equity_usd", type=float, help="starting USD equity (default: 10000)")
    p.add_argument(
        "--risk-free", dest="risk_free_annual", type=float, help=f"annual risk-free rate for Sharpe (default: {DEFAULT_RISK_FREE})"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marginlp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("backtest", help="backtest the margin liquidity strategy")
    _add_data_args(p)
    _add_strategy_args(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sweep", help="backtest once per leverage and write summary.csv")
    _add_data_args(p)
    _add_strategy_args(p, leverage=False)
    p.add_argument("--leverages", default="3,10,100,1000", help="comma-separated leverages (default: 3,10,100,1000)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default: 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="buy-and-hold baseline at the pair ratio")
    _add_data_args(p)
    _add_strategy_args(p, leverage=False)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("efficiency", help="write the capital efficiency curve as CSV")
    p.add_argument("--rmin", type=float, default=1.001, help="smallest p_high/p_low (default: 1.001)")
    p.add_argument("--rmax", type=float, default=1000.0, help="largest p_high/p_low (default: 1000)")
    p.add_argument("--points", type=int, default=100, help="grid size (default: 100)")
    p.add_argument("--out", help="output directory (default: out)")
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("validate", help="validate and align the three data files")
    _add_data_args(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: I/O failure{f' on {name}' if name else ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except (MarginLiquidityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
