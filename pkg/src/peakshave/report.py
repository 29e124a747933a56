"""Scenario configuration, study orchestration and table emission."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .benefits import ArbitragePolicy, BenefitReport, MonthShave, shave_months, total_benefit
from .costmodel import (
    DEFAULT_INTEREST_RATE,
    DEFAULT_LOSS_FRACTION,
    DEFAULT_LOSS_VALUATION,
    DEFAULT_MAINTENANCE_FRACTION,
    CatalogError,
    CostBreakdown,
    Technology,
    breakeven_year,
    load_catalog,
    size_to_cost,
)
from .dispatch import BessSpec, clamp_dispatch, required_energy
from .tariff import MonthlyBill, TariffSpec, bill_month, monthly_peak
from .timeseries import (
    MW,
    USD_PER_MWH,
    HourlySeries,
    MonthSlice,
    SeriesError,
    monthly_average,
    partition_months,
    read_series,
    split_months,
)


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


_TOP_KEYS = {
    "utility",
    "load",
    "real_time_prices",
    "day_ahead_prices",
    "tariff",
    "candidates",
    "arbitrage",
    "costs",
    "install_years",
    "study_shave_levels",
    "output",
}
_COST_KEYS = {
    "catalog",
    "bundled_catalog",
    "technologies",
    "interest_rate",
    "maintenance_fraction",
    "loss_fraction",
    "loss_valuation",
    "loss_usd_per_kwh",
}
_CANDIDATE_KEYS = {"name", "power_mw", "usable_energy_mwh", "dod", "round_trip_efficiency", "inverter_margin", "technology"}


@dataclass(frozen=True)
class Candidate:
    name: str
    bess: BessSpec


@dataclass(frozen=True)
class CostSettings:
    catalog: Optional[Path] = None
    bundled_catalog: str = "default"
    technologies: Optional[tuple] = None  # None: every catalog entry
    interest_rate: float = DEFAULT_INTEREST_RATE
    maintenance_fraction: float = DEFAULT_MAINTENANCE_FRACTION
    loss_fraction: float = DEFAULT_LOSS_FRACTION
    loss_valuation: str = "flat"  # or "day_ahead"
    loss_usd_per_kwh: float = DEFAULT_LOSS_VALUATION


@dataclass(frozen=True)
class ScenarioConfig:
    utility: str
    load_path: Path
    prices_path: Path
    tariff: TariffSpec
    candidates: tuple
    day_ahead_path: Optional[Path] = None
    arbitrage: ArbitragePolicy = ArbitragePolicy()
    costs: CostSettings = CostSettings()
    install_years: tuple = (2018, 2030)
    study_shave_levels: tuple = ()
    output_dir: Path = Path("out")
    output_format: str = "csv"

    @property
    def years(self) -> range:
        return range(self.install_years[0], self.install_years[1] + 1)


def _reject_unknown(section: str, data: dict, allowed: set) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(sorted(unknown))}")


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be a mapping")
    return value


def parse_config(raw: dict, base_dir: Path = Path(".")) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    _reject_unknown("config", raw, _TOP_KEYS)
    for key in ("utility", "load", "real_time_prices", "tariff"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    def path(key):
        value = raw.get(key)
        return None if value is None else (base_dir / value)

    try:
        tariff = TariffSpec(**_section(raw, "tariff"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"tariff: {exc}") from None

    cand_raw = raw.get("candidates") or []
    if not isinstance(cand_raw, list) or not cand_raw:
        raise ConfigError("at least one candidate is required")
    candidates = []
    for k, c in enumerate(cand_raw):
        if not isinstance(c, dict):
            raise ConfigError(f"candidate {k}: must be a mapping")
        _reject_unknown(f"candidate {k}", c, _CANDIDATE_KEYS)
        c = dict(c)
        name = str(c.pop("name", f"candidate-{k + 1}"))
        try:
            candidates.append(Candidate(name, BessSpec(**c)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"candidate {name}: {exc}") from None
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise ConfigError("candidate names must be unique")

    try:
        arbitrage = ArbitragePolicy(**_section(raw, "arbitrage"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"arbitrage: {exc}") from None

    costs_raw = dict(_section(raw, "costs"))
    _reject_unknown("costs", costs_raw, _COST_KEYS)
    if costs_raw.get("catalog") is not None:
        costs_raw["catalog"] = base_dir / costs_raw["catalog"]
    if costs_raw.get("technologies") is not None:
        costs_raw["technologies"] = tuple(costs_raw["technologies"])
    costs_raw = {k: v for k, v in costs_raw.items() if v is not None}
    try:
        costs = CostSettings(**costs_raw)
    except TypeError as exc:
        raise ConfigError(f"costs: {exc}") from None
    if costs.loss_valuation not in ("flat", "day_ahead"):
        raise ConfigError("costs.loss_valuation must be 'flat' or 'day_ahead'")

    years = _section(raw, "install_years")
    _reject_unknown("install_years", years, {"first", "last"})
    first, last = int(years.get("first", 2018)), int(years.get("last", 2030))
    if last < first:
        raise ConfigError("install_years: last precedes first")

    out = _section(raw, "output")
    _reject_unknown("output", out, {"directory", "format"})
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")

    levels = tuple(float(x) for x in (raw.get("study_shave_levels") or ()))
    if any(x <= 0 for x in levels):
        raise ConfigError("study_shave_levels must be positive")

    day_ahead = path("day_ahead_prices")
    if day_ahead is None and (costs.loss_valuation == "day_ahead" or arbitrage.mode == "price_based"):
        raise ConfigError("day_ahead_prices is required for price-based arbitrage or day-ahead loss valuation")

    config = ScenarioConfig(
        utility=str(raw["utility"]),
        load_path=path("load"),
        prices_path=path("real_time_prices"),
        day_ahead_path=day_ahead,
        tariff=tariff,
        candidates=tuple(candidates),
        arbitrage=arbitrage,
        costs=costs,
        install_years=(first, last),
        study_shave_levels=levels,
        output_dir=base_dir / out.get("directory", "out"),
        output_format=fmt,
    )
    for p in (config.load_path, config.prices_path, config.day_ahead_path, config.costs.catalog):
        if p is not None and not p.is_file():
            raise ConfigError(f"file not found: {p}")
    return config


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, path.parent)


@dataclass
class StudyData:
    """Parsed inputs of a scenario."""

    config: ScenarioConfig
    load: HourlySeries
    prices: HourlySeries
    day_ahead: Optional[HourlySeries]
    load_months: list
    price_months: list
    catalog: dict

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "StudyData":
        def read(p, unit):
            try:
                return read_series(p, unit)
            except SeriesError as exc:
                raise DataError(f"{config.utility}: {p.name}: {exc}") from None

        load = read(config.load_path, MW)
        prices = read(config.prices_path, USD_PER_MWH)
        day_ahead = read(config.day_ahead_path, USD_PER_MWH) if config.day_ahead_path else None
        try:
            load_months = split_months(load)
        except SeriesError as exc:
            raise DataError(f"{config.utility}: {config.load_path.name}: {exc}") from None
        price_by_label = {m.label: m for m in partition_months(prices)[0]}
        missing = [m.label for m in load_months if m.label not in price_by_label]
        if missing:
            raise DataError(f"{config.utility}: no complete real-time prices for {', '.join(missing)}")
        try:
            catalog = load_catalog(config.costs.catalog, bundled=config.costs.bundled_catalog)
        except (CatalogError, OSError) as exc:
            raise ConfigError(f"catalog: {exc}") from None
        wanted = config.costs.technologies
        if wanted is not None:
            unknown = [t for t in wanted if t not in catalog]
            if unknown:
                raise ConfigError(f"technologies not in catalog: {', '.join(unknown)}")
            catalog = {t: catalog[t] for t in wanted}
        for tech in catalog.values():
            if tech.first_year > config.install_years[0] or tech.last_year < config.install_years[1]:
                raise ConfigError(f"{tech.id} curve does not cover install years {config.install_years}")
        return cls(
            config=config,
            load=load,
            prices=prices,
            day_ahead=day_ahead,
            load_months=load_months,
            price_months=[price_by_label[m.label] for m in load_months],
            catalog=catalog,
        )

    def loss_valuation_usd_per_kwh(self) -> float:
        if self.config.costs.loss_valuation == "day_ahead":
            return math.fsum(self.day_ahead.values) / len(self.day_ahead) / 1000.0
        return self.config.costs.loss_usd_per_kwh

    def cost_kwargs(self) -> dict:
        c = self.config.costs
        return {
            "interest_rate": c.interest_rate,
            "maintenance_fraction": c.maintenance_fraction,
            "loss_fraction": c.loss_fraction,
            "loss_valuation_usd_per_kwh": self.loss_valuation_usd_per_kwh(),
        }


@dataclass
class CandidateReport:
    candidate: Candidate
    shaves: list
    baseline_bills: list
    shaved_bills: list
    shifting_rows: list
    required_energy_rows: list
    feasible_shave_rows: list
    benefits: BenefitReport
    costs: dict  # (technology, year) -> CostBreakdown
    breakeven: dict  # technology -> year or None
    warnings: list = field(default_factory=list)


@dataclass
class ScenarioReport:
    utility: str
    data_years: tuple
    candidates: list
    sizing_rows: list
    warnings: list
    price_stats: list = field(default_factory=list)


def baseline_bills(data: StudyData) -> list[MonthlyBill]:
    return [bill_month(lm, pm, data.config.tariff) for lm, pm in zip(data.load_months, data.price_months)]


def sizing_rows(data: StudyData) -> list[dict]:
    """For each study shave level: energy split and required storage per month."""
    tariff = data.config.tariff
    rows = []
    for level in data.config.study_shave_levels:
        for lm, pm in zip(data.load_months, data.price_months):
            peak = monthly_peak(lm)
            shave = min(level, peak)
            need = required_energy(lm, shave, shave)
            base = bill_month(lm, pm, tariff)
            probe = BessSpec(power_mw=shave, usable_energy_mwh=need)
            shaved = bill_month(clamp_dispatch(lm, peak - shave, probe, capacity_mwh=math.inf).shaved_load, pm, tariff)
            rows.append(
                {
                    "shave_mw": level,
                    "month": lm.label,
                    "over_allocation": peak > tariff.allocation_mw,
                    "firm_mwh": shaved.firm_energy_mwh,
                    "market_mwh": shaved.market_energy_mwh,
                    "benefit_mwh": shaved.firm_energy_mwh - base.firm_energy_mwh,
                    "required_energy_mwh": need,
                }
            )
    return rows


def candidate_shaves(data: StudyData, candidate: Candidate) -> list[MonthShave]:
    return shave_months(data.load_months, candidate.bess)


def evaluate_candidate(data: StudyData, candidate: Candidate) -> CandidateReport:
    config = data.config
    tariff = config.tariff
    bess = candidate.bess
    shaves = candidate_shaves(data, candidate)
    benefits = total_benefit(shaves, data.price_months, data.day_ahead, tariff, bess, config.arbitrage)

    base_bills, shaved_bills, shifting, required, feasible, warnings = [], [], [], [], [], []
    for ms, pm in zip(shaves, data.price_months):
        base = bill_month(ms.load, pm, tariff)
        shaved = bill_month(ms.dispatch.shaved_load, pm, tariff)
        base_bills.append(base)
        shaved_bills.append(shaved)
        if ms.peak_mw > tariff.allocation_mw:
            shifting.append(
                {
                    "month": ms.label,
                    "shave_mw": ms.shave_mw,
                    "firm_mwh": shaved.firm_energy_mwh,
                    "market_mwh": shaved.market_energy_mwh,
                    "benefit_mwh": shaved.firm_energy_mwh - base.firm_energy_mwh,
                    "bess_energy_mwh": required_energy(ms.load, ms.shave_mw, bess.power_mw, bess.round_trip_efficiency),
                }
            )
        target = min(bess.power_mw, ms.peak_mw)
        need = required_energy(ms.load, target, bess.power_mw, bess.round_trip_efficiency)
        required.append(
            {
                "month": ms.label,
                "shave_mw": target,
                "required_energy_mwh": need,
                "nameplate_energy_mwh": need / bess.dod,
            }
        )
        derated = ms.shave_mw < target
        feasible.append(
            {
                "month": ms.label,
                "usable_energy_mwh": bess.usable_energy_mwh,
                "feasible_shave_mw": ms.shave_mw,
                "derated": derated,
            }
        )
        if derated:
            warnings.append(
                {
                    "kind": "derated_shave",
                    "candidate": candidate.name,
                    "month": ms.label,
                    "detail": f"{bess.usable_energy_mwh} MWh holds {ms.shave_mw:.3f} of {target:.3f} MW",
                }
            )

    kwargs = data.cost_kwargs()
    throughput = benefits.annual_throughput_kwh
    costs, breakeven = {}, {}
    for tid, tech in data.catalog.items():
        for year in config.years:
            costs[(tid, year)] = size_to_cost(bess, tech, year, throughput, **kwargs)
        breakeven[tid] = breakeven_year(benefits.total_usd, tech, bess, config.years, annual_throughput_kwh=throughput, **kwargs)

    return CandidateReport(
        candidate=candidate,
        shaves=shaves,
        baseline_bills=base_bills,
        shaved_bills=shaved_bills,
        shifting_rows=shifting,
        required_energy_rows=required,
        feasible_shave_rows=feasible,
        benefits=benefits,
        costs=costs,
        breakeven=breakeven,
        warnings=warnings,
    )


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    if not config.candidates:
        raise ConfigError("at least one candidate is required")
    data = StudyData.from_config(config)
    try:
        candidates = [evaluate_candidate(data, c) for c in config.candidates]
        sizing = sizing_rows(data)
    except SeriesError as exc:
        raise DataError(f"{config.utility}: {exc}") from None
    stats, gaps = price_stats(data.prices)
    warnings = [w for c in candidates for w in c.warnings] + gaps
    years = tuple(sorted({m.year for m in data.load_months}))
    return ScenarioReport(config.utility, years, candidates, sizing, warnings, stats)


# ---------------------------------------------------------------- emission

def whole_dollars(x: float) -> int:
    return int(round(x))


def _r(x: float, ndigits: int) -> float:
    return round(x, ndigits) + 0.0  # drop negative zero


def round_mw(x: float) -> float:
    return _r(x, 3)


def round_mwh(x: float) -> float:
    return _r(x, 2)


def bill_record(candidate: str, case: str, bill: MonthlyBill) -> dict:
    parts = {
        "firm_energy_cost": whole_dollars(bill.firm_energy_cost),
        "market_energy_cost": whole_dollars(bill.market_energy_cost),
        "demand_charge": whole_dollars(bill.demand_charge),
        "wheeling_demand_charge": whole_dollars(bill.wheeling_demand_charge),
    }
    return {
        "candidate": candidate,
        "month": bill.month,
        "case": case,
        "peak_mw": round_mw(bill.peak_mw),
        "firm_share": _r(bill.firm_share, 4),
        "firm_energy_mwh": round_mwh(bill.firm_energy_mwh),
        "market_energy_mwh": round_mwh(bill.market_energy_mwh),
        **parts,
        "total": sum(parts.values()),
    }


def benefit_record(candidate: str, month: str, alloc, demand, wheel, arb, shifted) -> dict:
    parts = {
        "allocation_shifting_usd": whole_dollars(alloc),
        "demand_reduction_usd": whole_dollars(demand),
        "wheeling_reduction_usd": whole_dollars(wheel),
        "arbitrage_usd": whole_dollars(arb),
    }
    return {"candidate": candidate, "month": month, **parts, "total_usd": sum(parts.values()), "shifted_energy_mwh": round_mwh(shifted)}


def cost_record(candidate: str, tid: str, year: int, cost: CostBreakdown, benefit: float) -> dict:
    parts = {
        "energy_annuity": whole_dollars(cost.energy_annuity),
        "power_annuity": whole_dollars(cost.power_annuity),
        "maintenance": whole_dollars(cost.maintenance),
        "loss": whole_dollars(cost.loss),
    }
    total = sum(parts.values())
    return {"candidate": candidate, "technology": tid, "install_year": year, **parts, "total": total, "annual_benefit_usd": whole_dollars(benefit)}


def build_tables(report: ScenarioReport) -> dict[str, list[dict]]:
    """Rounded, presentation-ready records keyed by table name."""
    tables: dict[str, list[dict]] = {
        "bills": [],
        "allocation_shifting": [],
        "required_energy": [],
        "feasible_shave": [],
        "benefits": [],
        "costs": [],
        "breakeven": [],
        "sizing": [],
        "warnings": [],
    }
    for cr in report.candidates:
        name = cr.candidate.name
        for base, shaved in zip(cr.baseline_bills, cr.shaved_bills):
            tables["bills"].append(bill_record(name, "baseline", base))
            tables["bills"].append(bill_record(name, "shaved", shaved))
        for row in cr.shifting_rows:
            tables["allocation_shifting"].append(
                {
                    "candidate": name,
                    "month": row["month"],
                    "shave_mw": round_mw(row["shave_mw"]),
                    "firm_mwh": round_mwh(row["firm_mwh"]),
                    "market_mwh": round_mwh(row["market_mwh"]),
                    "benefit_mwh": round_mwh(row["benefit_mwh"]),
                    "bess_energy_mwh": round_mwh(row["bess_energy_mwh"]),
                }
            )
        for row in cr.required_energy_rows:
            tables["required_energy"].append(
                {
                    "candidate": name,
                    "month": row["month"],
                    "shave_mw": round_mw(row["shave_mw"]),
                    "required_energy_mwh": round_mwh(row["required_energy_mwh"]),
                    "nameplate_energy_mwh": round_mwh(row["nameplate_energy_mwh"]),
                }
            )
        for row in cr.feasible_shave_rows:
            tables["feasible_shave"].append(
                {
                    "candidate": name,
                    "month": row["month"],
                    "usable_energy_mwh": round_mwh(row["usable_energy_mwh"]),
                    "feasible_shave_mw": round_mw(row["feasible_shave_mw"]),
                    "derated": row["derated"],
                }
            )
        b = cr.benefits
        for m in b.months:
            tables["benefits"].append(
                benefit_record(
                    name,
                    m.month,
                    m.allocation_shifting_usd,
                    m.demand_reduction_usd,
                    m.wheeling_reduction_usd,
                    m.arbitrage_usd,
                    m.shifted_energy_mwh,
                )
            )
        tables["benefits"].append(
            benefit_record(
                name,
                "total",
                b.allocation_shifting_usd,
                b.demand_reduction_usd,
                b.wheeling_reduction_usd,
                b.arbitrage_usd,
                b.shifted_energy_mwh,
            )
        )
        for (tid, year), cost in cr.costs.items():
            tables["costs"].append(cost_record(name, tid, year, cost, b.total_usd))
        for tid, year in cr.breakeven.items():
            tables["breakeven"].append(
                {
                    "candidate": name,
                    "technology": tid,
                    "annual_benefit_usd": whole_dollars(b.total_usd),
                    "breakeven_year": year,
                }
            )
    for row in report.sizing_rows:
        tables["sizing"].append(
            {
                "shave_mw": round_mw(row["shave_mw"]),
                "month": row["month"],
                "over_allocation": row["over_allocation"],
                "firm_mwh": round_mwh(row["firm_mwh"]),
                "market_mwh": round_mwh(row["market_mwh"]),
                "benefit_mwh": round_mwh(row["benefit_mwh"]),
                "required_energy_mwh": round_mwh(row["required_energy_mwh"]),
            }
        )
    tables["warnings"] = [dict(w) for w in report.warnings]
    tables["price_stats"] = [dict(r) for r in report.price_stats]
    return tables


TABLE_COLUMNS = {
    "bills": [
        "candidate", "month", "case", "peak_mw", "firm_share", "firm_energy_mwh", "market_energy_mwh",
        "firm_energy_cost", "market_energy_cost", "demand_charge", "wheeling_demand_charge", "total",
    ],
    "allocation_shifting": ["candidate", "month", "shave_mw", "firm_mwh", "market_mwh", "benefit_mwh", "bess_energy_mwh"],
    "required_energy": ["candidate", "month", "shave_mw", "required_energy_mwh", "nameplate_energy_mwh"],
    "feasible_shave": ["candidate", "month", "usable_energy_mwh", "feasible_shave_mw", "derated"],
    "benefits": [
        "candidate", "month", "allocation_shifting_usd", "demand_reduction_usd", "wheeling_reduction_usd",
        "arbitrage_usd", "total_usd", "shifted_energy_mwh",
    ],
    "costs": [
        "candidate", "technology", "install_year", "energy_annuity", "power_annuity", "maintenance", "loss",
        "total", "annual_benefit_usd",
    ],
    "breakeven": ["candidate", "technology", "annual_benefit_usd", "breakeven_year"],
    "sizing": ["shave_mw", "month", "over_allocation", "firm_mwh", "market_mwh", "benefit_mwh", "required_energy_mwh"],
    "warnings": ["kind", "candidate", "month", "detail"],
    "price_stats": ["year", "month", "mean_price_usd_per_mwh"],
    "arbitrage": ["candidate", "mode", "eligible_days", "arbitrage_usd"],
}


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def format_table(name: str, rows: list[dict], fmt: str) -> str:
    columns = TABLE_COLUMNS[name]
    if fmt == "json":
        return json.dumps([{c: r.get(c) for c in columns} for r in rows], indent=2) + "\n"
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_csv_cell(r.get(c)) for c in columns])
    return out.getvalue()


def _write(out_dir: Path, name: str, text: str, fmt: str) -> Path:
    path = out_dir / f"{name}.{fmt}"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_tables(report: ScenarioReport, out_dir, fmt: str = "csv") -> list[Path]:
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out_dir = Path(out_dir)
    return [_write(out_dir, name, format_table(name, rows, fmt), fmt) for name, rows in build_tables(report).items()]


def price_stats(prices: HourlySeries, years=None) -> tuple[list[dict], list[dict]]:
    """Monthly mean price rows plus a warning record per skipped incomplete month."""
    slices, gaps = partition_months(prices)
    wanted = None if years is None else set(years)
    rows = [
        {"year": m.year, "month": m.month, "mean_price_usd_per_mwh": _r(monthly_average(m), 2)}
        for m in slices
        if wanted is None or m.year in wanted
    ]
    warnings = [
        {"kind": "incomplete_month", "candidate": None, "month": f"{g.year:04d}-{g.month:02d}", "detail": f"{g.missing} hour(s) missing"}
        for g in gaps
        if wanted is None or g.year in wanted
    ]
    return rows, warnings


def emit_price_stats(prices: HourlySeries, years, out_dir, fmt: str = "csv") -> tuple[Path, list[dict]]:
    rows, warnings = price_stats(prices, years)
    return _write(Path(out_dir), "price_stats", format_table("price_stats", rows, fmt), fmt), warnings
