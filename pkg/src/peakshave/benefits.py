"""Annual benefit streams of a candidate battery.

Four streams are computed independently and summed:

allocation shifting
    In months whose peak exceeds the firm allocation, a lower peak raises
    the firm load share, moving energy from market price to the firm rate.
demand reduction
    The capped demand charge falls when the shaved peak sits below the
    allocation.
wheeling reduction
    Uncapped demand-based wheeling charge on the peak.
arbitrage
    One hour of charge and one of discharge per eligible day.

Interactions between streams (arbitrage cycling eating into peak-shave
headroom) are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .dispatch import BessSpec, DispatchResult, clamp_dispatch, max_feasible_shave
from .tariff import KW_PER_MW, MonthlyBill, TariffSpec, bill_month, monthly_peak
from .timeseries import AlignmentError, HourlySeries, MonthSlice, SeriesError, split_months

CONSERVATIVE_FLAT = "conservative_flat"
PRICE_BASED = "price_based"

YearLike = Union[HourlySeries, Sequence[MonthSlice]]


class EmptyPriceDay(SeriesError):
    pass


@dataclass(frozen=True)
class ArbitragePolicy:
    mode: str = CONSERVATIVE_FLAT
    flat_rate_usd_per_day_per_mw: float = 25.0
    margin_mw: Optional[float] = None  # None: use the battery's power rating
    eligible_day_count: Optional[int] = None  # fixed day count instead of the load-driven rule

    def __post_init__(self):
        if self.mode not in (CONSERVATIVE_FLAT, PRICE_BASED):
            raise ValueError(f"unknown arbitrage mode {self.mode!r}")
        if self.flat_rate_usd_per_day_per_mw < 0:
            raise ValueError("flat_rate_usd_per_day_per_mw must be >= 0")
        if self.margin_mw is not None and self.margin_mw < 0:
            raise ValueError("margin_mw must be >= 0")
        if self.eligible_day_count is not None:
            if self.eligible_day_count < 0:
                raise ValueError("eligible_day_count must be >= 0")
            if self.mode != CONSERVATIVE_FLAT:
                raise ValueError("eligible_day_count only applies to conservative_flat mode")


@dataclass(frozen=True, eq=False)
class MonthShave:
    """Dispatch outcome for one month at the battery's feasible shave."""

    load: MonthSlice
    peak_mw: float
    shave_mw: float
    dispatch: DispatchResult

    @property
    def shaved_peak_mw(self) -> float:
        return self.peak_mw - self.shave_mw

    @property
    def label(self) -> str:
        return self.load.label


@dataclass(frozen=True)
class MonthBenefit:
    month: str
    peak_mw: float
    shave_mw: float
    allocation_shifting_usd: float
    shifted_energy_mwh: float
    demand_reduction_usd: float
    wheeling_reduction_usd: float
    arbitrage_usd: float
    eligible_days: int

    @property
    def total_usd(self) -> float:
        return self.allocation_shifting_usd + self.demand_reduction_usd + self.wheeling_reduction_usd + self.arbitrage_usd


@dataclass(frozen=True)
class BenefitReport:
    allocation_shifting_usd: float
    demand_reduction_usd: float
    wheeling_reduction_usd: float
    arbitrage_usd: float
    shifted_energy_mwh: float = 0.0
    months: tuple = field(default_factory=tuple)
    discharge_mwh: float = 0.0
    arbitrage_cycled_mwh: float = 0.0

    @property
    def total_usd(self) -> float:
        return self.allocation_shifting_usd + self.demand_reduction_usd + self.wheeling_reduction_usd + self.arbitrage_usd

    @property
    def annual_throughput_kwh(self) -> float:
        return (self.discharge_mwh + self.arbitrage_cycled_mwh) * 1000.0


def as_months(year: YearLike) -> list[MonthSlice]:
    if isinstance(year, HourlySeries):
        return split_months(year)
    return list(year)


def _price_lookup(prices_year: YearLike) -> dict[str, MonthSlice]:
    return {m.label: m for m in as_months(prices_year)}


def shave_months(load_year: YearLike, bess: BessSpec) -> list[MonthShave]:
    out = []
    for month in as_months(load_year):
        peak = monthly_peak(month)
        shave = max_feasible_shave(month, bess)
        out.append(MonthShave(month, peak, shave, clamp_dispatch(month, peak - shave, bess)))
    return out


def _shaves(load_year, bess) -> list[MonthShave]:
    # callers may hand in precomputed shaves to avoid re-running dispatch
    if isinstance(load_year, (list, tuple)) and load_year and isinstance(load_year[0], MonthShave):
        return list(load_year)
    return shave_months(load_year, bess)


def _shift_month(ms: MonthShave, prices: MonthSlice, spec: TariffSpec) -> tuple[float, float, MonthlyBill, MonthlyBill]:
    base = bill_month(ms.load, prices, spec)
    shaved = bill_month(ms.dispatch.shaved_load, prices, spec)
    return base.energy_cost - shaved.energy_cost, shaved.firm_energy_mwh - base.firm_energy_mwh, base, shaved


def allocation_shifting_benefit(load_year, prices_year: YearLike, spec: TariffSpec, bess: BessSpec) -> tuple[float, float]:
    """Energy-cost saving and firm MWh gained in months over allocation."""
    prices = _price_lookup(prices_year)
    usd, mwh = [], []
    for ms in _shaves(load_year, bess):
        if ms.peak_mw <= spec.allocation_mw:
            continue
        if ms.label not in prices:
            raise AlignmentError(f"no prices for {ms.label}")
        saved, shifted, _, _ = _shift_month(ms, prices[ms.label], spec)
        usd.append(saved)
        mwh.append(shifted)
    return math.fsum(usd), math.fsum(mwh)


def _demand_saving(ms: MonthShave, spec: TariffSpec) -> float:
    cap = spec.allocation_mw
    return spec.demand_rate * KW_PER_MW * (min(ms.peak_mw, cap) - min(ms.shaved_peak_mw, cap))


def _wheeling_saving(ms: MonthShave, spec: TariffSpec) -> float:
    return spec.wheeling_demand_rate * KW_PER_MW * ms.shave_mw


def demand_reduction_benefit(load_year, spec: TariffSpec, bess: BessSpec) -> float:
    return math.fsum(_demand_saving(ms, spec) for ms in _shaves(load_year, bess))


def wheeling_reduction_benefit(load_year, spec: TariffSpec, bess: BessSpec) -> float:
    return math.fsum(_wheeling_saving(ms, spec) for ms in _shaves(load_year, bess))


def eligible_days(ms: MonthShave, spec: TariffSpec, bess: BessSpec, policy: ArbitragePolicy) -> list[np.datetime64]:
    """Days of an over-allocation month on which cycling cannot set the monthly peak.

    Below allocation every MWh is bought at the firm rate, so there is no
    market purchase to optimize.
    """
    if ms.peak_mw <= spec.allocation_mw:
        return []
    margin = bess.power_mw if policy.margin_mw is None else policy.margin_mw
    limit = ms.shaved_peak_mw - margin
    values = ms.load.values
    days = []
    for idx in ms.load.days():
        if values[idx].max() <= limit:
            days.append(ms.load.timestamps[idx[0]].astype("datetime64[D]"))
    return days


def _day_prices(day_ahead: HourlySeries) -> dict:
    days = day_ahead.timestamps.astype("datetime64[D]")
    out: dict = {}
    for d in np.unique(days):
        out[d] = day_ahead.values[days == d]
    return out


def arbitrage_energy_mwh(bess: BessSpec) -> float:
    """Energy bought per arbitrage day: one hour at rated power, limited by storage."""
    return min(bess.power_mw * 1.0, bess.usable_energy_mwh)


def arbitrage_benefit(
    day_ahead_prices: Optional[HourlySeries],
    bess: BessSpec,
    policy: ArbitragePolicy,
    eligible: Union[int, Iterable[np.datetime64]],
) -> float:
    """Arbitrage value over the eligible days.

    In ``price_based`` mode each day buys in its cheapest hour and sells in
    its dearest. Order within the day is not enforced: the battery idles full,
    so it can discharge first and refill afterwards.
    """
    if policy.mode == CONSERVATIVE_FLAT:
        n = eligible if isinstance(eligible, int) else len(list(eligible))
        return policy.flat_rate_usd_per_day_per_mw * bess.power_mw * n
    if isinstance(eligible, int):
        raise ValueError("price_based arbitrage needs the eligible dates, not a count")
    if day_ahead_prices is None:
        raise ValueError("price_based arbitrage needs day-ahead prices")
    by_day = _day_prices(day_ahead_prices)
    energy = arbitrage_energy_mwh(bess)
    eta = bess.round_trip_efficiency
    profits = []
    for day in eligible:
        p = by_day.get(np.datetime64(day, "D"))
        if p is None or len(p) == 0:
            raise EmptyPriceDay(f"no day-ahead prices for {day}")
        profits.append(max(0.0, energy * (float(p.max()) * eta - float(p.min()))))
    return math.fsum(profits)


def total_benefit(
    load_year,
    prices_year: YearLike,
    day_ahead: Optional[HourlySeries],
    spec: TariffSpec,
    bess: BessSpec,
    policy: ArbitragePolicy = ArbitragePolicy(),
) -> BenefitReport:
    prices = _price_lookup(prices_year)
    shaves = _shaves(load_year, bess)
    months = []
    day_lists = []
    for ms in shaves:
        if ms.peak_mw > spec.allocation_mw:
            if ms.label not in prices:
                raise AlignmentError(f"no prices for {ms.label}")
            saved, shifted, _, _ = _shift_month(ms, prices[ms.label], spec)
        else:
            saved, shifted = 0.0, 0.0
        days = eligible_days(ms, spec, bess, policy)
        day_lists.append(days)
        arb = 0.0 if policy.eligible_day_count is not None else arbitrage_benefit(day_ahead, bess, policy, days)
        months.append(
            MonthBenefit(
                month=ms.label,
                peak_mw=ms.peak_mw,
                shave_mw=ms.shave_mw,
                allocation_shifting_usd=saved,
                shifted_energy_mwh=shifted,
                demand_reduction_usd=_demand_saving(ms, spec),
                wheeling_reduction_usd=_wheeling_saving(ms, spec),
                arbitrage_usd=arb,
                eligible_days=len(days),
            )
        )
    if policy.eligible_day_count is not None:
        n_days = policy.eligible_day_count
        arbitrage = arbitrage_benefit(day_ahead, bess, policy, n_days)
    else:
        n_days = sum(len(d) for d in day_lists)
        arbitrage = math.fsum(m.arbitrage_usd for m in months)
    return BenefitReport(
        allocation_shifting_usd=math.fsum(m.allocation_shifting_usd for m in months),
        demand_reduction_usd=math.fsum(m.demand_reduction_usd for m in months),
        wheeling_reduction_usd=math.fsum(m.wheeling_reduction_usd for m in months),
        arbitrage_usd=arbitrage,
        shifted_energy_mwh=math.fsum(m.shifted_energy_mwh for m in months),
        months=tuple(months),
        discharge_mwh=math.fsum(ms.dispatch.discharge_mwh_total for ms in shaves),
        arbitrage_cycled_mwh=arbitrage_energy_mwh(bess) * n_days,
    )
