"""Firm-hydro allocation tariff.

A month's bill has four parts:

* energy within the firm hydro load share, billed at the firm rate;
* the remaining energy, billed hour by hour at the real-time market price;
* a demand charge on the monthly peak, capped at the allocation;
* an optional demand-based wheeling charge on the full (uncapped) peak.

Rates follow billing units: energy in $/MWh, demand in $/kW-month.
Loads are hourly MW, so one hour of load is numerically its MWh.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .timeseries import AlignmentError, EmptySlice, MonthSlice, check_aligned

KW_PER_MW = 1000.0

MonthLike = Union[MonthSlice, np.ndarray, list]


def as_values(load: MonthLike) -> np.ndarray:
    if isinstance(load, MonthSlice):
        return load.values
    return np.asarray(load, dtype=float).ravel()


@dataclass(frozen=True)
class TariffSpec:
    allocation_mw: float
    firm_energy_rate: float = 4.92
    demand_rate: float = 4.07
    wheeling_demand_rate: float = 0.0

    def __post_init__(self):
        if not self.allocation_mw > 0:
            raise ValueError(f"allocation_mw must be positive, got {self.allocation_mw}")
        for name in ("firm_energy_rate", "demand_rate", "wheeling_demand_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class MonthlyBill:
    peak_mw: float
    firm_share: float
    firm_energy_mwh: float
    market_energy_mwh: float
    firm_energy_cost: float
    market_energy_cost: float
    demand_charge: float
    wheeling_demand_charge: float
    month: Optional[str] = None

    @property
    def energy_cost(self) -> float:
        return self.firm_energy_cost + self.market_energy_cost

    @property
    def total(self) -> float:
        return self.firm_energy_cost + self.market_energy_cost + self.demand_charge + self.wheeling_demand_charge

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def monthly_peak(load: MonthLike) -> float:
    values = as_values(load)
    if len(values) == 0:
        raise EmptySlice("no hours in month")
    return float(values.max())


def firm_load_share(peak_mw: float, allocation_mw: float) -> float:
    """Fraction of each hour's energy billed at the firm rate."""
    if peak_mw <= allocation_mw:
        return 1.0
    return allocation_mw / peak_mw


def split_energy(load: MonthLike, share: float) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < share <= 1:
        raise ValueError(f"share must be in (0, 1], got {share}")
    values = as_values(load)
    firm = values * share
    if share == 1.0:
        return firm, np.zeros_like(values)
    return firm, values - firm


def energy_cost(firm_by_hour, market_by_hour, prices: MonthLike, firm_rate: float) -> tuple[float, float]:
    firm = np.asarray(firm_by_hour, dtype=float)
    market = np.asarray(market_by_hour, dtype=float)
    price = as_values(prices)
    if not (len(firm) == len(market) == len(price)):
        raise AlignmentError(f"energy has {len(market)} hours, prices have {len(price)}")
    return firm_rate * math.fsum(firm), math.fsum(market * price)


def demand_charge(peak_mw: float, spec: TariffSpec) -> float:
    return spec.demand_rate * KW_PER_MW * min(peak_mw, spec.allocation_mw)


def wheeling_demand_charge(peak_mw: float, spec: TariffSpec) -> float:
    return spec.wheeling_demand_rate * KW_PER_MW * peak_mw


def bill_month(load: MonthLike, prices: MonthLike, spec: TariffSpec) -> MonthlyBill:
    if isinstance(load, MonthSlice) and isinstance(prices, MonthSlice):
        check_aligned(load, prices)
    peak = monthly_peak(load)
    share = firm_load_share(peak, spec.allocation_mw)
    firm, market = split_energy(load, share)
    firm_cost, market_cost = energy_cost(firm, market, prices, spec.firm_energy_rate)
    return MonthlyBill(
        peak_mw=peak,
        firm_share=share,
        firm_energy_mwh=math.fsum(firm),
        market_energy_mwh=math.fsum(market),
        firm_energy_cost=firm_cost,
        market_energy_cost=market_cost,
        demand_charge=demand_charge(peak, spec),
        wheeling_demand_charge=wheeling_demand_charge(peak, spec),
        month=load.label if isinstance(load, MonthSlice) else None,
    )
