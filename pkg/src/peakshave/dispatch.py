"""Peak-clamp battery dispatch.

The battery watches the metered load hour by hour. Above the target peak it
discharges just enough to hold the meter at the target. Below the target it
recharges toward full, never pushing the meter above the target. Losses are
taken on the charge side (stored energy = charge x round-trip efficiency);
discharge is 1:1 at the meter. Each month starts with a full battery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .tariff import MonthLike, as_values
from .timeseries import MonthSlice
from .validation import check_fraction, check_load, check_non_negative

FEASIBILITY_TOL = 1e-9
SHAVE_STEP_MW = 0.001


@dataclass(frozen=True)
class BessSpec:
    power_mw: float
    usable_energy_mwh: float
    dod: float = 1.0
    round_trip_efficiency: float = 1.0
    inverter_margin: float = 0.2
    technology: str = "NaS"

    def __post_init__(self):
        check_non_negative("power_mw", self.power_mw)
        check_non_negative("usable_energy_mwh", self.usable_energy_mwh)
        check_non_negative("inverter_margin", self.inverter_margin)
        check_fraction("dod", self.dod)
        check_fraction("round_trip_efficiency", self.round_trip_efficiency)

    @property
    def nameplate_energy_mwh(self) -> float:
        return self.usable_energy_mwh / self.dod


@dataclass(frozen=True, eq=False)
class DispatchResult:
    shaved_load: MonthLike
    discharge: np.ndarray
    charge: np.ndarray
    soc_trace: np.ndarray  # usable MWh at the start of each hour, plus the final state
    target_peak_mw: float
    required_energy_mwh: float  # deepest depletion below full seen during the run
    unserved_mwh: float
    feasible: bool

    @property
    def discharge_mwh_total(self) -> float:
        return math.fsum(self.discharge)

    @property
    def charge_mwh_total(self) -> float:
        return math.fsum(self.charge)

    @property
    def achieved_peak_mw(self) -> float:
        return float(np.max(as_values(self.shaved_load)))


def _simulate(values, target, power, capacity, eta):
    """Hour loop shared by every dispatch query.

    Tracks the depletion below full rather than the state of charge so an
    unbounded capacity needs no special casing.
    """
    n = len(values)
    discharge = [0.0] * n
    charge = [0.0] * n
    depletion = [0.0] * (n + 1)
    d = 0.0
    deepest = 0.0
    unserved = 0.0
    worst = 0.0
    for h, load in enumerate(values):
        if load > target:
            want = load - target
            out = min(want, power, capacity - d)
            if out < 0.0:
                out = 0.0
            discharge[h] = out
            unserved += want - out
            if want - out > worst:
                worst = want - out
            d += out
            if d > deepest:
                deepest = d
        elif load < target and d > 0.0:
            inp = min(power, target - load, d / eta)
            charge[h] = inp
            d -= inp * eta
            if d < 0.0:
                d = 0.0
        depletion[h + 1] = d
    return discharge, charge, depletion, deepest, unserved, worst


def clamp_dispatch(
    load: MonthLike,
    target_peak_mw: float,
    spec: BessSpec,
    capacity_mwh: Optional[float] = None,
) -> DispatchResult:
    """Run the clamp policy for one month.

    ``capacity_mwh`` overrides ``spec.usable_energy_mwh``; pass ``math.inf``
    for an unbounded store.
    """
    if target_peak_mw < 0:
        raise ValueError("target_peak_mw must be >= 0")
    values = as_values(load)
    capacity = spec.usable_energy_mwh if capacity_mwh is None else capacity_mwh
    discharge, charge, depletion, deepest, unserved, worst = _simulate(
        values.tolist(), target_peak_mw, spec.power_mw, capacity, spec.round_trip_efficiency
    )
    discharge = np.asarray(discharge)
    charge = np.asarray(charge)
    shaved = values - discharge + charge
    if isinstance(load, MonthSlice):
        shaved = load.with_values(shaved)
    return DispatchResult(
        shaved_load=shaved,
        discharge=discharge,
        charge=charge,
        soc_trace=capacity - np.asarray(depletion),
        target_peak_mw=target_peak_mw,
        required_energy_mwh=deepest,
        unserved_mwh=unserved,
        feasible=worst <= FEASIBILITY_TOL,
    )


def required_energy(load: MonthLike, shave_mw: float, power_mw: float, round_trip_efficiency: float = 1.0) -> float:
    """Smallest usable energy (MWh) that holds the month's peak ``shave_mw`` lower."""
    values = as_values(load)
    peak = float(values.max())
    if shave_mw < 0 or shave_mw > peak + FEASIBILITY_TOL:
        raise ValueError(f"shave {shave_mw} MW outside [0, peak={peak}]")
    if power_mw < shave_mw:
        raise ValueError(f"power {power_mw} MW cannot deliver a {shave_mw} MW shave")
    if shave_mw == 0:
        return 0.0
    _, _, _, deepest, _, _ = _simulate(values.tolist(), peak - shave_mw, power_mw, math.inf, round_trip_efficiency)
    return max(deepest, 0.0)


def _shave_is_feasible(values: list, peak: float, shave: float, spec: BessSpec) -> bool:
    *_, worst = _simulate(values, peak - shave, spec.power_mw, spec.usable_energy_mwh, spec.round_trip_efficiency)
    return worst <= FEASIBILITY_TOL


def max_feasible_shave(load: MonthLike, spec: BessSpec) -> float:
    """Largest peak reduction the battery can hold for the whole month.

    The full ``min(power, peak)`` is returned when it is feasible; otherwise
    the answer is the largest feasible multiple of 1 kW, found by bisection.
    """
    values = as_values(load).tolist()
    peak = max(values)
    upper = min(spec.power_mw, peak)
    if upper <= 0:
        return 0.0
    if _shave_is_feasible(values, peak, upper, spec):
        return upper
    lo = 0
    hi = math.floor(upper / SHAVE_STEP_MW + 1e-9)
    if hi * SHAVE_STEP_MW >= upper:
        hi -= 1
    hi += 1  # sentinel: treated as infeasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _shave_is_feasible(values, peak, mid / 1000, spec):
            lo = mid
        else:
            hi = mid
    return lo / 1000


def recommend_inverter_rating(shave_mw: float, spec: BessSpec) -> float:
    """Inverter MW needed to deliver ``shave_mw`` of real demand reduction."""
    if shave_mw < 0:
        raise ValueError("shave_mw must be >= 0")
    return shave_mw * (1.0 + spec.inverter_margin)


class PeakShaver(BaseEstimator, TransformerMixin):
    """Fit a monthly target peak to a load trace, then clamp loads to it.

    ``fit`` finds the deepest shave the battery can hold on the given month
    (or uses ``shave_mw`` derated to what is feasible). ``transform``
    returns the metered load after battery action against that target::

        shaver = PeakShaver(power_mw=0.5, usable_energy_mwh=2.0).fit(january)
        shaved = shaver.transform(january)   # max(shaved) == shaver.target_peak_mw_
    """

    def __init__(self, power_mw=1.0, usable_energy_mwh=1.0, round_trip_efficiency=1.0, shave_mw=None):
        self.power_mw = power_mw
        self.usable_energy_mwh = usable_energy_mwh
        self.round_trip_efficiency = round_trip_efficiency
        self.shave_mw = shave_mw

    def _spec(self) -> BessSpec:
        return BessSpec(
            power_mw=self.power_mw,
            usable_energy_mwh=self.usable_energy_mwh,
            round_trip_efficiency=self.round_trip_efficiency,
        )

    def fit(self, X, y=None):
        load = check_load(X)
        spec = self._spec()
        feasible = max_feasible_shave(load, spec)
        shave = feasible if self.shave_mw is None else min(self.shave_mw, feasible)
        self.peak_mw_ = float(load.max())
        self.shave_mw_ = shave
        self.derated_ = self.shave_mw is not None and shave < self.shave_mw
        self.target_peak_mw_ = self.peak_mw_ - shave
        self.required_energy_mwh_ = required_energy(load, shave, spec.power_mw, spec.round_trip_efficiency)
        return self

    def transform(self, X):
        check_is_fitted(self, "target_peak_mw_")
        load = check_load(X)
        shaved = clamp_dispatch(load, self.target_peak_mw_, self._spec()).shaved_load
        if np.ndim(X) == 2:
            return shaved.reshape(-1, 1)
        return shaved
