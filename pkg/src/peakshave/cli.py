"""Command line entry point.

``report`` runs the whole study and writes one file per table. The other
subcommands run a single stage and print its table to stdout.

Exit status: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report as rp
from .benefits import arbitrage_benefit, eligible_days, shave_months
from .costmodel import CatalogError, size_to_cost
from .dispatch import required_energy
from .timeseries import SeriesError

log = logging.getLogger("peakshave")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


def _study(args) -> rp.StudyData:
    return rp.StudyData.from_config(rp.load_config(args.config))


def _print(name: str, rows: list, fmt: str) -> None:
    sys.stdout.write(rp.format_table(name, rows, fmt))


def cmd_bill(args) -> int:
    data = _study(args)
    _print("bills", [rp.bill_record("", "baseline", b) for b in rp.baseline_bills(data)], args.format)
    return EXIT_OK


def cmd_shave(args) -> int:
    data = _study(args)
    rows = []
    for cand in data.config.candidates:
        for ms in shave_months(data.load_months, cand.bess):
            rows.append(
                {
                    "candidate": cand.name,
                    "month": ms.label,
                    "usable_energy_mwh": rp.round_mwh(cand.bess.usable_energy_mwh),
                    "feasible_shave_mw": rp.round_mw(ms.shave_mw),
                    "derated": ms.shave_mw < min(cand.bess.power_mw, ms.peak_mw),
                }
            )
    _print("feasible_shave", rows, args.format)
    return EXIT_OK


def cmd_size(args) -> int:
    data = _study(args)
    rows = []
    for cand in data.config.candidates:
        b = cand.bess
        for m in data.load_months:
            shave = min(b.power_mw, float(m.values.max()))
            need = required_energy(m, shave, b.power_mw, b.round_trip_efficiency)
            rows.append(
                {
                    "candidate": cand.name,
                    "month": m.label,
                    "shave_mw": rp.round_mw(shave),
                    "required_energy_mwh": rp.round_mwh(need),
                    "nameplate_energy_mwh": rp.round_mwh(need / b.dod),
                }
            )
    _print("required_energy", rows, args.format)
    return EXIT_OK


def cmd_arbitrage(args) -> int:
    data = _study(args)
    cfg = data.config
    rows = []
    for cand in cfg.candidates:
        days = [d for ms in shave_months(data.load_months, cand.bess) for d in eligible_days(ms, cfg.tariff, cand.bess, cfg.arbitrage)]
        n = cfg.arbitrage.eligible_day_count if cfg.arbitrage.eligible_day_count is not None else days
        usd = arbitrage_benefit(data.day_ahead, cand.bess, cfg.arbitrage, n)
        rows.append(
            {
                "candidate": cand.name,
                "mode": cfg.arbitrage.mode,
                "eligible_days": n if isinstance(n, int) else len(n),
                "arbitrage_usd": rp.whole_dollars(usd),
            }
        )
    _print("arbitrage", rows, args.format)
    return EXIT_OK


def cmd_cost(args) -> int:
    data = _study(args)
    kwargs = data.cost_kwargs()
    rows = []
    for cand in data.config.candidates:
        for tid, tech in data.catalog.items():
            for year in data.config.years:
                cost = size_to_cost(cand.bess, tech, year, args.throughput_kwh, **kwargs)
                row = rp.cost_record(cand.name, tid, year, cost, 0.0)
                row["annual_benefit_usd"] = None
                rows.append(row)
    _print("costs", rows, args.format)
    return EXIT_OK


def cmd_report(args) -> int:
    config = rp.load_config(args.config)
    result = rp.run_scenario(config)
    out = Path(args.out) if args.out else config.output_dir
    fmt = args.format or config.output_format
    for path in rp.emit_tables(result, out, fmt):
        log.info("wrote %s", path)
    for w in result.warnings:
        log.warning("%s %s %s: %s", w["kind"], w.get("candidate") or "", w.get("month") or "", w["detail"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peakshave", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, default_format="csv"):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        # also accepted after the subcommand; SUPPRESS keeps the global value otherwise
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        p.set_defaults(func=func)
        return p

    add("bill", cmd_bill, "baseline monthly bills")
    add("shave", cmd_shave, "feasible shave per candidate and month")
    add("size", cmd_size, "storage energy required for each candidate's full shave")
    add("arbitrage", cmd_arbitrage, "market-rate optimization benefit")
    p = add("cost", cmd_cost, "annualized cost by technology and install year")
    p.add_argument("--throughput-kwh", type=float, default=0.0, help="annual throughput for the loss term")
    p = add("report", cmd_report, "full study; writes every table", default_format=None)
    p.add_argument("--out", help="output directory (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (rp.ConfigError, CatalogError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (rp.DataError, SeriesError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
