"""Acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL summary line per
check is printed at the end of the session.
"""

import time

import numpy as np
import pytest

from conftest import FIXTURES, make_month
from oracles import annuity_due_payment, bisect_capacity, greedy_dispatch, grid_search_shave
from peakshave import report as rp
from peakshave.benefits import (
    ArbitragePolicy,
    BenefitReport,
    allocation_shifting_benefit,
    arbitrage_benefit,
    wheeling_reduction_benefit,
)
from peakshave.cli import main
from peakshave.costmodel import CostInputs, annual_cost, breakeven_year, load_catalog, pv_annual
from peakshave.dispatch import BessSpec, clamp_dispatch, max_feasible_shave, required_energy
from peakshave.tariff import TariffSpec, bill_month, demand_charge, firm_load_share
from peakshave.timeseries import MW, read_series, split_months
from test_benefits import const_prices, spike_month

pytestmark = pytest.mark.acceptance


def test_annuity_anchor_values():
    start = time.perf_counter()
    assert pv_annual(1000, 0.03, 1) == 1000.00
    assert pv_annual(1000, 0, 10) == 100.00
    # hand evaluation: 1000 * 0.03 / ((1 - 1.03**-10) * 1.03)
    by_hand = 1000 * 0.03 / ((1 - 1 / 1.03**10) * 1.03)
    assert abs(pv_annual(1000, 0.03, 10) - by_hand) <= 0.01
    assert abs(pv_annual(1000, 0.03, 10) - annuity_due_payment(1000, 0.03, 10)) <= 0.01
    assert time.perf_counter() - start < 1.0


def test_cost_breakdown_anchor():
    b = annual_cost(CostInputs(annual_throughput_kwh=100_000), energy_annuity=100, power_annuity=50)
    assert b.maintenance == 2.25
    assert b.loss == 100.00
    assert b.total == 252.25


def test_arithmetic_anchors():
    flat = ArbitragePolicy()
    assert arbitrage_benefit(None, BessSpec(1.0, 1.0), flat, 28) == 700

    m = spike_month(212.0)
    usd, mwh = allocation_shifting_benefit([m], [const_prices(m, 29.92)], TariffSpec(18.845), BessSpec(0.5, 5.0))
    assert abs(mwh - 212.0) < 1e-6
    assert abs(usd - 5300) <= 1

    capped_demand = BenefitReport(22731, 11641, 0, 1875)
    assert capped_demand.total_usd == 36247
    assert rp.benefit_record("0.5MW", "total", 22731, 11641, 0, 1875, 0)["total_usd"] == 36247
    wheeled = BenefitReport(37196, 0, 14880, 3750)
    assert wheeled.total_usd == 55826
    assert rp.benefit_record("0.5MW", "total", 37196, 0, 14880, 3750, 0)["total_usd"] == 55826

    months = []
    for mo in range(1, 13):
        mm = make_month(0.0, month=mo)
        v = np.full(len(mm), 24.0)
        v[100] = 25.0
        months.append(mm.with_values(v))
    spec = TariffSpec(23.556, wheeling_demand_rate=2.48)
    assert wheeling_reduction_benefit(months, spec, BessSpec(0.5, 10.0)) == 14880


def test_tariff_properties():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 745))
        load = rng.uniform(0, 40, n)
        prices = rng.uniform(4.92, 120, n)
        alloc = float(rng.uniform(1, 40))
        spec = TariffSpec(alloc)
        bill = bill_month(load, prices, spec)
        total = float(np.sum(load))
        assert abs(bill.firm_energy_mwh + bill.market_energy_mwh - total) <= 1e-9 * max(total, 1.0)
        assert (bill.firm_share == 1.0) == (load.max() <= alloc)
        if load.max() >= alloc:
            assert bill.demand_charge == pytest.approx(alloc * 4.07 * 1000, rel=1e-12)
        assert demand_charge(alloc + float(rng.uniform(0, 20)), spec) == demand_charge(alloc, spec)
        # lower the peak, everything else fixed
        cap = float(rng.uniform(0.5, 1.0)) * load.max()
        lowered = bill_month(np.minimum(load, cap), prices, spec)
        assert lowered.energy_cost <= bill.energy_cost + 1e-9 * max(bill.energy_cost, 1.0)
        assert firm_load_share(cap, alloc) >= bill.firm_share
    assert time.perf_counter() - start < 30.0


def test_dispatch_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    for _ in range(500):
        n = int(rng.integers(2, 73))
        load = rng.uniform(4, 6, n)
        loads = load.tolist()
        power = float(rng.uniform(0.05, 0.3))
        peak = max(loads)
        shave = float(rng.uniform(0, min(power, peak)))
        eta = float(rng.choice([1.0, 0.85]))

        full_need = required_energy(load, shave, power, eta)
        oracle_need = bisect_capacity(loads, shave, power, eta)
        assert abs(full_need - oracle_need) <= 1e-6

        capacity = float(rng.uniform(0, 1.3)) * max(full_need, 0.05)
        spec = BessSpec(power, capacity, round_trip_efficiency=eta)
        res = clamp_dispatch(load, peak - shave, spec)
        d, c, soc, feasible = greedy_dispatch(loads, peak - shave, power, capacity, eta)
        np.testing.assert_allclose(res.discharge, d, rtol=0, atol=1e-12)
        np.testing.assert_allclose(res.charge, c, rtol=0, atol=1e-12)
        np.testing.assert_allclose(res.soc_trace, soc, rtol=0, atol=1e-12)
        assert res.feasible == feasible

        assert max_feasible_shave(load, spec) == grid_search_shave(loads, power, capacity, eta)
    assert time.perf_counter() - start < 60.0


def test_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(24, 200))
        load = rng.uniform(5, 15, n)
        shaves = np.linspace(0, min(3.0, load.max()), 10)
        needs = [required_energy(load, s, 3.0) for s in shaves]
        assert all(a <= b + 1e-12 for a, b in zip(needs, needs[1:]))

    for _ in range(20):
        load = rng.uniform(5, 15, int(rng.integers(24, 120)))
        by_energy = [max_feasible_shave(load, BessSpec(1.0, e)) for e in np.linspace(0, 6, 13)]
        assert all(a <= b for a, b in zip(by_energy, by_energy[1:]))
        by_power = [max_feasible_shave(load, BessSpec(p, 2.0)) for p in np.linspace(0, 3, 13)]
        assert all(a <= b for a, b in zip(by_power, by_power[1:]))

    nas = load_catalog()["NaS"]
    bess = BessSpec(1.0, 2.2)
    years = range(2018, 2031)
    found = [breakeven_year(b, nas, bess, years) for b in np.linspace(0, 150_000, 76)]
    later = [10_000 if y is None else y for y in found]
    assert all(a >= b for a, b in zip(later, later[1:]))


def test_fixture_behaviour():
    load = split_months(read_series(FIXTURES / "winter_peaking" / "load.csv", MW))
    january = load[0]
    e = {s: required_energy(january, s, s) for s in (0.5, 1.0, 2.0)}
    assert e[1.0] > 2 * e[0.5]
    assert e[2.0] > 2 * e[1.0]

    always = rp.run_scenario(rp.load_config(FIXTURES / "always_over" / "scenario.yaml"))
    for cr in always.candidates:
        assert cr.benefits.demand_reduction_usd == 0.0
        assert all(m.demand_reduction_usd == 0.0 for m in cr.benefits.months)

    nas = load_catalog()["NaS"]
    years = range(2018, 2031)
    year = breakeven_year(36247, nas, BessSpec(0.5, 0.75), years)
    assert year is not None and year <= 2020
    assert breakeven_year(53584, nas, BessSpec(1.0, 6.0), years) is None

    winter = rp.run_scenario(rp.load_config(FIXTURES / "winter_peaking" / "scenario.yaml"))
    (big,) = [cr for cr in winter.candidates if cr.candidate.bess.usable_energy_mwh == 6.0]
    assert big.breakeven["NaS"] is None


def test_report_determinism(tmp_path, capsys):
    config = FIXTURES / "seasonal_over" / "scenario.yaml"
    for run in ("first", "second"):
        assert main(["report", "--config", str(config), "--out", str(tmp_path / run)]) == 0
    first = sorted((tmp_path / "first").iterdir())
    assert first
    for f in first:
        assert f.read_bytes() == (tmp_path / "second" / f.name).read_bytes()
