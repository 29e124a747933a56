import csv
import json

import numpy as np
import pytest
import yaml

from conftest import FIXTURES, make_year
from oracles import hand_bill
from peakshave import report as rp
from peakshave.timeseries import USD_PER_MWH, HourlySeries, month_hours, write_series


def toy_scenario(tmp_path, candidates=None, **overrides):
    """Three months: January over allocation, February and March under it."""
    rng = np.random.default_rng(7)
    load = {}
    for m in (1, 2, 3):
        n = len(month_hours(2018, m))
        h = np.arange(n) % 24
        v = 8 + 2 * np.exp(-(((h - 18) / 3.0) ** 4)) + rng.normal(0, 0.02, n)
        if m == 1:
            v[24 * 9 + 16 : 24 * 9 + 20] += 1.5
        load[m] = np.round(v, 4)
    prices = {m: np.round(rng.uniform(15, 60, len(month_hours(2018, m))), 2) for m in (1, 2, 3)}
    write_series(tmp_path / "load.csv", make_year(load))
    write_series(tmp_path / "rt.csv", make_year(prices, unit=USD_PER_MWH))
    write_series(tmp_path / "da.csv", make_year(prices, unit=USD_PER_MWH))
    cfg = {
        "utility": "toy",
        "load": "load.csv",
        "real_time_prices": "rt.csv",
        "day_ahead_prices": "da.csv",
        "tariff": {"allocation_mw": 10.5},
        "candidates": candidates
        or [
            {"name": "small", "power_mw": 0.5, "usable_energy_mwh": 1.0},
            {"name": "big", "power_mw": 1.0, "usable_energy_mwh": 3.0},
        ],
        "install_years": {"first": 2018, "last": 2022},
        "output": {"directory": "out", "format": "csv"},
    }
    cfg.update(overrides)
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return path, load, prices


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_baseline_bills_match_hand_oracle(tmp_path):
    path, load, prices = toy_scenario(tmp_path)
    data = rp.StudyData.from_config(rp.load_config(path))
    bills = rp.baseline_bills(data)
    assert [b.month for b in bills] == ["2018-01", "2018-02", "2018-03"]
    for m, bill in zip((1, 2, 3), bills):
        expected = hand_bill(load[m].tolist(), prices[m].tolist(), 10.5, 4.92, 4.07)
        assert bill.total == pytest.approx(expected["total"], rel=1e-12)
        assert bill.firm_share == pytest.approx(expected["firm_share"], rel=1e-15)


def test_candidate_sections_keep_order(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    report = rp.run_scenario(rp.load_config(path))
    assert [c.candidate.name for c in report.candidates] == ["small", "big"]
    tables = rp.build_tables(report)
    assert [r["candidate"] for r in tables["benefits"] if r["month"] == "total"] == ["small", "big"]


def test_tables_reconcile(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    tables = rp.build_tables(rp.run_scenario(rp.load_config(path)))
    for row in tables["bills"]:
        parts = ("firm_energy_cost", "market_energy_cost", "demand_charge", "wheeling_demand_charge")
        assert row["total"] == sum(row[k] for k in parts)
    for row in tables["benefits"]:
        parts = ("allocation_shifting_usd", "demand_reduction_usd", "wheeling_reduction_usd", "arbitrage_usd")
        assert row["total_usd"] == sum(row[k] for k in parts)
    for row in tables["costs"]:
        assert row["total"] == row["energy_annuity"] + row["power_annuity"] + row["maintenance"] + row["loss"]


def test_shifted_energy_is_coherent_across_tables(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    report = rp.run_scenario(rp.load_config(path))
    tables = rp.build_tables(report)
    for cr in report.candidates:
        name = cr.candidate.name
        shifted = sum(r["benefit_mwh"] for r in cr.shifting_rows)
        assert shifted == pytest.approx(cr.benefits.shifted_energy_mwh, abs=1e-9)
        (total,) = [r for r in tables["benefits"] if r["candidate"] == name and r["month"] == "total"]
        assert total["shifted_energy_mwh"] == rp.round_mwh(cr.benefits.shifted_energy_mwh)


def test_shifting_table_columns(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    out = tmp_path / "tables"
    rp.emit_tables(rp.run_scenario(rp.load_config(path)), out, "csv")
    header = (out / "allocation_shifting.csv").read_text().splitlines()[0].split(",")
    assert header[-5:] == ["shave_mw", "firm_mwh", "market_mwh", "benefit_mwh", "bess_energy_mwh"]


def test_csv_and_json_carry_identical_values(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    report = rp.run_scenario(rp.load_config(path))
    rp.emit_tables(report, tmp_path / "c", "csv")
    rp.emit_tables(report, tmp_path / "j", "json")
    for name in rp.build_tables(report):
        rows_json = json.loads((tmp_path / "j" / f"{name}.json").read_text())
        rows_csv = read_csv(tmp_path / "c" / f"{name}.csv")
        assert len(rows_json) == len(rows_csv)
        for a, b in zip(rows_json, rows_csv):
            assert [rp._csv_cell(v) for v in a.values()] == list(b.values())


def test_rerun_is_byte_identical(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    for run in ("a", "b"):
        rp.emit_tables(rp.run_scenario(rp.load_config(path)), tmp_path / run, "json")
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_derated_shave_is_a_warning_record(tmp_path):
    path, *_ = toy_scenario(tmp_path, candidates=[{"name": "tiny", "power_mw": 1.0, "usable_energy_mwh": 0.2}])
    report = rp.run_scenario(rp.load_config(path))
    kinds = {w["kind"] for w in report.warnings}
    assert "derated_shave" in kinds
    assert all(set(w) >= {"kind", "candidate", "month", "detail"} for w in report.warnings)


def test_empty_candidates_is_config_error(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    raw = yaml.safe_load(path.read_text())
    raw["candidates"] = []
    with pytest.raises(rp.ConfigError):
        rp.parse_config(raw, tmp_path)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.pop("tariff"),
        lambda c: c.update(surprise=1),
        lambda c: c["tariff"].update(allocation_mw=-1),
        lambda c: c.update(load="missing.csv"),
        lambda c: c["candidates"].append(dict(c["candidates"][0])),
        lambda c: c.update(install_years={"first": 2025, "last": 2020}),
        lambda c: c.update(output={"format": "xml"}),
        lambda c: c.update(arbitrage={"mode": "price_based", "eligible_day_count": 3}),
        lambda c: c.update(costs={"technologies": ["Unobtainium"]}),
    ],
)
def test_bad_config(tmp_path, mutate):
    path, *_ = toy_scenario(tmp_path)
    raw = yaml.safe_load(path.read_text())
    mutate(raw)
    with pytest.raises(rp.ConfigError):
        rp.StudyData.from_config(rp.parse_config(raw, tmp_path))


def test_unparseable_load_is_data_error(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    (tmp_path / "load.csv").write_text("timestamp,load_mw\n2018-01-01T00:00,oops\n")
    with pytest.raises(rp.DataError):
        rp.StudyData.from_config(rp.load_config(path))


def test_price_stats_constant_year():
    prices = make_year({m: 30.0 for m in range(1, 13)}, unit=USD_PER_MWH)
    rows, warnings = rp.price_stats(prices)
    assert [r["mean_price_usd_per_mwh"] for r in rows] == [30.0] * 12
    assert warnings == []


def test_price_stats_two_years_grouped():
    a = make_year({m: 20.0 for m in range(1, 13)}, year=2018, unit=USD_PER_MWH)
    b = make_year({m: 25.0 for m in range(1, 13)}, year=2019, unit=USD_PER_MWH)
    rows, _ = rp.price_stats(HourlySeries.concat([a, b]))
    assert len(rows) == 24
    assert [r["year"] for r in rows] == [2018] * 12 + [2019] * 12


def test_price_stats_seasonal_vs_naive(rng):
    per_month = {m: 30 + 10 * np.cos(m / 12 * 2 * np.pi) + rng.normal(0, 5, len(month_hours(2018, m))) for m in range(1, 13)}
    rows, _ = rp.price_stats(make_year(per_month, unit=USD_PER_MWH))
    for r in rows:
        v = per_month[r["month"]]
        assert r["mean_price_usd_per_mwh"] == round(sum(v.tolist()) / len(v), 2)


def test_price_stats_skips_incomplete_month(tmp_path):
    year = make_year({1: 10.0, 2: 20.0}, unit=USD_PER_MWH)
    trimmed = HourlySeries(year.timestamps[:-1], year.values[:-1], USD_PER_MWH)
    path, warnings = rp.emit_price_stats(trimmed, [2018], tmp_path)
    assert len(read_csv(path)) == 1
    assert warnings[0]["kind"] == "incomplete_month" and warnings[0]["month"] == "2018-02"


def test_unwritable_output(tmp_path):
    path, *_ = toy_scenario(tmp_path)
    blocker = tmp_path / "blocked"
    blocker.write_text("a file, not a directory")
    with pytest.raises(OSError):
        rp.emit_tables(rp.run_scenario(rp.load_config(path)), blocker / "sub", "csv")


def test_bundled_fixture_configs_parse():
    for scenario in sorted(FIXTURES.glob("*/scenario.yaml")):
        cfg = rp.load_config(scenario)
        assert cfg.candidates
        assert all(p.exists() for p in (cfg.load_path, cfg.prices_path, cfg.day_ahead_path))
