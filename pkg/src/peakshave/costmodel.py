"""Annualized storage cost and breakeven.

The yearly cost of an installation is

    annual = annuity(energy subsystem) + annuity(power conversion)
             + maintenance + conversion losses

where each annuity spreads a present value over the service life with
beginning-of-year payments (annuity-due), maintenance is a fraction of the
two annuities and losses are a fraction of annual throughput valued per kWh.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .dispatch import BessSpec, recommend_inverter_rating

TECHNOLOGY_IDS = ("NMC", "LFP", "NaS", "VRLA", "FLA")
CATALOG_FIELDS = ("id", "year", "usd_per_kwh", "usd_per_kw", "dod", "efficiency", "life_years", "provenance")

DEFAULT_INTEREST_RATE = 0.03
DEFAULT_MAINTENANCE_FRACTION = 0.015
DEFAULT_LOSS_FRACTION = 0.02
DEFAULT_LOSS_VALUATION = 0.05  # $/kWh

BUNDLED_CATALOGS = {
    "default": "technologies.csv",
    "direct_served": "technologies_direct_served.csv",
}


class YearOutOfRange(ValueError):
    pass


class CatalogError(ValueError):
    pass


def pv_annual(pv: float, i: float, n: int) -> float:
    """Annuity-due payment that repays ``pv`` over ``n`` years at rate ``i``."""
    if pv < 0 or i < 0 or n < 1:
        raise ValueError(f"need pv >= 0, i >= 0, n >= 1 (got {pv}, {i}, {n})")
    if i == 0:
        return pv / n
    if n == 1:
        return pv  # single payment at the start of year one
    # expm1/log1p keep the small-rate limit accurate
    discount = -math.expm1(-n * math.log1p(i))
    return pv * i / (discount * (1 + i))


@dataclass(frozen=True)
class CostInputs:
    pv_energy_usd: float = 0.0
    pv_power_usd: float = 0.0
    interest_rate: float = DEFAULT_INTEREST_RATE
    life_years: int = 15
    maintenance_fraction: float = DEFAULT_MAINTENANCE_FRACTION
    loss_fraction: float = DEFAULT_LOSS_FRACTION
    loss_valuation_usd_per_kwh: float = DEFAULT_LOSS_VALUATION
    annual_throughput_kwh: float = 0.0

    def __post_init__(self):
        if self.interest_rate < 0:
            raise ValueError("interest_rate must be >= 0")
        if self.life_years < 1:
            raise ValueError("life_years must be >= 1")
        for name in ("maintenance_fraction", "loss_fraction"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1)")


@dataclass(frozen=True)
class CostBreakdown:
    energy_annuity: float
    power_annuity: float
    maintenance: float
    loss: float
    inputs: Optional[CostInputs] = None

    @property
    def total(self) -> float:
        return self.energy_annuity + self.power_annuity + self.maintenance + self.loss


def annual_cost(inputs: CostInputs, *, energy_annuity: Optional[float] = None, power_annuity: Optional[float] = None) -> CostBreakdown:
    """Yearly cost with components.

    The two annuities may be supplied directly, bypassing the present values.
    """
    es = pv_annual(inputs.pv_energy_usd, inputs.interest_rate, inputs.life_years) if energy_annuity is None else energy_annuity
    pc = pv_annual(inputs.pv_power_usd, inputs.interest_rate, inputs.life_years) if power_annuity is None else power_annuity
    maintenance = inputs.maintenance_fraction * (es + pc)
    loss = inputs.loss_fraction * inputs.annual_throughput_kwh * inputs.loss_valuation_usd_per_kwh
    return CostBreakdown(es, pc, maintenance, loss, inputs)


@dataclass(frozen=True)
class TechnologyPoint:
    year: int
    usd_per_kwh: float
    usd_per_kw: float
    dod: float
    efficiency: float
    life_years: int
    provenance: str = ""


@dataclass(frozen=True)
class TechnologyYear:
    """A technology's parameters for one install year."""

    id: str
    year: int
    usd_per_kwh: float
    usd_per_kw: float
    dod: float
    efficiency: float
    life_years: int


@dataclass(frozen=True)
class Technology:
    """Cost and performance curves, piecewise-linear between anchor years.

    Service life is a step function: the value of the latest anchor at or
    before the install year.
    """

    id: str
    anchors: tuple

    def __post_init__(self):
        if not self.anchors:
            raise CatalogError(f"{self.id}: no anchor years")
        years = [a.year for a in self.anchors]
        if years != sorted(set(years)):
            raise CatalogError(f"{self.id}: anchor years must be unique and increasing")
        for a in self.anchors:
            if a.usd_per_kwh <= 0 or a.usd_per_kw <= 0 or a.life_years < 1:
                raise CatalogError(f"{self.id} {a.year}: costs must be positive and life >= 1")
            if not (0 < a.dod <= 1 and 0 < a.efficiency <= 1):
                raise CatalogError(f"{self.id} {a.year}: dod and efficiency must be in (0, 1]")

    @property
    def first_year(self) -> int:
        return self.anchors[0].year

    @property
    def last_year(self) -> int:
        return self.anchors[-1].year

    def at(self, year: int) -> TechnologyYear:
        if not self.first_year <= year <= self.last_year:
            raise YearOutOfRange(f"{self.id}: {year} outside {self.first_year}-{self.last_year}")
        years = [a.year for a in self.anchors]
        k = bisect_right(years, year) - 1
        lo = self.anchors[k]
        if lo.year == year or k == len(self.anchors) - 1:
            hi, t = lo, 0.0
        else:
            hi = self.anchors[k + 1]
            t = (year - lo.year) / (hi.year - lo.year)

        def lerp(name):
            return getattr(lo, name) + t * (getattr(hi, name) - getattr(lo, name))

        return TechnologyYear(
            self.id, year, lerp("usd_per_kwh"), lerp("usd_per_kw"), lerp("dod"), lerp("efficiency"), lo.life_years
        )

    def energy_cost_usd_per_kwh(self, year: int) -> float:
        return self.at(year).usd_per_kwh

    def power_cost_usd_per_kw(self, year: int) -> float:
        return self.at(year).usd_per_kw


def parse_catalog(rows: Iterable[dict]) -> dict[str, Technology]:
    grouped: dict[str, list[TechnologyPoint]] = {}
    for n, row in enumerate(rows, start=2):
        try:
            tid = row["id"].strip()
            point = TechnologyPoint(
                year=int(row["year"]),
                usd_per_kwh=float(row["usd_per_kwh"]),
                usd_per_kw=float(row["usd_per_kw"]),
                dod=float(row["dod"]),
                efficiency=float(row["efficiency"]),
                life_years=int(row["life_years"]),
                provenance=(row.get("provenance") or "").strip(),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"catalog row {n}: {exc}") from None
        grouped.setdefault(tid, []).append(point)
    return {tid: Technology(tid, tuple(sorted(pts, key=lambda p: p.year))) for tid, pts in grouped.items()}


def load_catalog(path: Union[str, Path, None] = None, *, bundled: str = "default") -> dict[str, Technology]:
    """Read a technology catalog CSV, or one of the bundled placeholder catalogs."""
    if path is None:
        if bundled not in BUNDLED_CATALOGS:
            raise CatalogError(f"no bundled catalog {bundled!r}; choose from {sorted(BUNDLED_CATALOGS)}")
        text = resources.files("peakshave.data").joinpath(BUNDLED_CATALOGS[bundled]).read_text(encoding="utf-8")
        return parse_catalog(csv.DictReader(text.splitlines()))
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_catalog(csv.DictReader(fh))


def size_to_cost(
    bess: BessSpec,
    tech: Technology,
    install_year: int,
    annual_throughput_kwh: float = 0.0,
    *,
    interest_rate: float = DEFAULT_INTEREST_RATE,
    maintenance_fraction: float = DEFAULT_MAINTENANCE_FRACTION,
    loss_fraction: float = DEFAULT_LOSS_FRACTION,
    loss_valuation_usd_per_kwh: float = DEFAULT_LOSS_VALUATION,
) -> CostBreakdown:
    """Annual cost of building ``bess`` with ``tech`` in ``install_year``.

    Energy is bought at nameplate (usable over the technology's DoD); the
    power conversion system is bought at the recommended inverter rating.
    """
    params = tech.at(install_year)
    nameplate_kwh = bess.usable_energy_mwh / params.dod * 1000.0
    inverter_kw = recommend_inverter_rating(bess.power_mw, bess) * 1000.0
    inputs = CostInputs(
        pv_energy_usd=nameplate_kwh * params.usd_per_kwh,
        pv_power_usd=inverter_kw * params.usd_per_kw,
        interest_rate=interest_rate,
        life_years=params.life_years,
        maintenance_fraction=maintenance_fraction,
        loss_fraction=loss_fraction,
        loss_valuation_usd_per_kwh=loss_valuation_usd_per_kwh,
        annual_throughput_kwh=annual_throughput_kwh,
    )
    return annual_cost(inputs)


def breakeven_year(annual_benefit_usd: float, tech: Technology, bess: BessSpec, years: Iterable[int], **cost_kw) -> Optional[int]:
    """First install year whose annual cost does not exceed the benefit."""
    years = list(years)
    if not years:
        raise ValueError("empty year range")
    for year in years:
        if size_to_cost(bess, tech, year, **cost_kw).total <= annual_benefit_usd:
            return year
    return None


def calibrate_unit_costs(
    units: list[tuple[BessSpec, float]],
    *,
    dod: float = 1.0,
    life_years: int = 15,
    interest_rate: float = DEFAULT_INTEREST_RATE,
    maintenance_fraction: float = DEFAULT_MAINTENANCE_FRACTION,
) -> tuple[float, float]:
    """Solve for ($/kWh, $/kW) so two units hit their target annual costs (no losses)."""
    if len(units) != 2:
        raise ValueError("calibration needs exactly two (unit, annual cost) pairs")
    scale = pv_annual(1.0, interest_rate, life_years) * (1 + maintenance_fraction)
    a = np.array(
        [[b.usable_energy_mwh / dod * 1000 * scale, recommend_inverter_rating(b.power_mw, b) * 1000 * scale] for b, _ in units]
    )
    rhs = np.array([cost for _, cost in units])
    per_kwh, per_kw = np.linalg.solve(a, rhs)
    return float(per_kwh), float(per_kw)
