"""Deterministic synthetic load and price years.

Real utility load data is confidential, so the bundled fixtures are built
here: a two-hump daily shape with a flat-topped evening peak, an AR(1)
day-to-day weather swing, a three-day January cold snap, and per-month
affine rescaling that pins each month's peak and mean exactly.
Running this module regenerates the bundled fixture files::

    python -m peakshave.synthetic src/peakshave/data/fixtures
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .timeseries import MW, USD_PER_MWH, HourlySeries, hours_in_month, month_hours, write_series


def daily_shape(hours: np.ndarray) -> np.ndarray:
    """Morning and evening humps on a flat overnight base, peak near 1."""
    h = hours % 24
    return 0.70 + 0.10 * np.exp(-(((h - 8.0) / 2.5) ** 2)) + 0.30 * np.exp(-(((h - 18.0) / 3.0) ** 4))


def _ar1(rng: np.random.Generator, n: int, rho: float, sigma: float) -> np.ndarray:
    x = np.empty(n)
    x[0] = rng.normal(0, sigma)
    for k in range(1, n):
        x[k] = rho * x[k - 1] + rng.normal(0, sigma)
    return x


def cold_snap(n: int, first_day: int = 9, days: int = 3, amplitude: float = 0.1) -> np.ndarray:
    """Daytime heating plateau added over a run of consecutive days."""
    h = np.arange(n)
    on = (h // 24 >= first_day) & (h // 24 < first_day + days)
    return on * amplitude * np.exp(-((((h % 24) - 15.0) / 6.0) ** 2))


def synthetic_load(year: int, peaks: list, means: list, seed: int, weather_sigma: float = 0.04) -> HourlySeries:
    """One year of hourly MW with the given monthly peaks and means."""
    rng = np.random.default_rng(seed)
    parts_t, parts_v = [], []
    for month in range(1, 13):
        ts = month_hours(year, month)
        n = len(ts)
        weather = np.repeat(_ar1(rng, n // 24, 0.75, weather_sigma), 24)
        raw = daily_shape(np.arange(n)) * (1 + weather) + rng.normal(0, 0.002, n)
        if month == 1:
            raw = raw + cold_snap(n)
        peak, mean = peaks[month - 1], means[month - 1]
        k = (peak - mean) / (raw.max() - raw.mean())
        values = mean + (raw - raw.mean()) * k
        parts_t.append(ts)
        parts_v.append(np.round(np.clip(values, 0.0, None), 4))
    return HourlySeries(np.concatenate(parts_t), np.concatenate(parts_v), MW)


def synthetic_prices(year: int, monthly_means: list, seed: int, volatility: float = 0.25) -> HourlySeries:
    """Positive hourly $/MWh with a diurnal swing and lognormal noise."""
    rng = np.random.default_rng(seed)
    parts_t, parts_v = [], []
    for month in range(1, 13):
        ts = month_hours(year, month)
        n = hours_in_month(year, month)
        shape = daily_shape(np.arange(n))
        shape = (shape - shape.min()) / (shape.max() - shape.min())
        values = monthly_means[month - 1] * (0.75 + 0.5 * shape) * np.exp(rng.normal(0, volatility, n))
        parts_t.append(ts)
        parts_v.append(np.round(values, 2))
    return HourlySeries(np.concatenate(parts_t), np.concatenate(parts_v), USD_PER_MWH)


NORTH_ZONE_MEANS = [45.0, 38.0, 30.0, 25.0, 20.0, 22.0, 28.0, 26.0, 20.0, 20.0, 27.0, 35.0]


@dataclass
class Profile:
    name: str
    utility: str
    peaks: list
    load_factor: float
    tariff: dict
    candidates: list
    seed: int
    arbitrage: dict = field(default_factory=lambda: {"mode": "conservative_flat"})
    costs: dict = field(default_factory=dict)
    study_shave_levels: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    year: int = 2018

    def means(self) -> list:
        return [round(p * self.load_factor, 3) for p in self.peaks]


PROFILES = {
    "winter_peaking": Profile(
        name="winter_peaking",
        utility="Winter-peaking village (allocation exceeded in January only)",
        peaks=[22.6, 18.4, 17.2, 15.4, 13.6, 14.2, 15.8, 15.3, 13.7, 14.6, 16.6, 18.3],
        load_factor=0.66,
        tariff={"allocation_mw": 18.845},
        candidates=[
            {"name": "0.5MW", "power_mw": 0.5, "usable_energy_mwh": 0.83},
            {"name": "1.0MW", "power_mw": 1.0, "usable_energy_mwh": 6.0},
        ],
        seed=2018_01,
    ),
    "seasonal_over": Profile(
        name="seasonal_over",
        utility="Resort village (allocation exceeded in six winter months)",
        peaks=[51.3, 45.0, 40.2, 31.5, 26.0, 24.5, 26.4, 26.1, 23.2, 27.0, 35.4, 44.1],
        load_factor=0.62,
        tariff={"allocation_mw": 28.915},
        candidates=[
            {"name": "0.5MW", "power_mw": 0.5, "usable_energy_mwh": 0.75},
            {"name": "1.0MW", "power_mw": 1.0, "usable_energy_mwh": 2.20},
        ],
        seed=2018_02,
    ),
    "always_over": Profile(
        name="always_over",
        utility="Direct-served town (allocation exceeded every month)",
        peaks=[38.2, 36.0, 34.1, 31.0, 29.5, 31.8, 33.6, 33.0, 29.8, 29.9, 32.7, 36.5],
        load_factor=0.72,
        tariff={"allocation_mw": 23.556, "wheeling_demand_rate": 2.48},
        candidates=[
            {"name": "0.5MW", "power_mw": 0.5, "usable_energy_mwh": 1.80},
            {"name": "1.0MW", "power_mw": 1.0, "usable_energy_mwh": 4.50},
        ],
        costs={"bundled_catalog": "direct_served"},
        seed=2018_03,
    ),
}


def write_fixture(profile: Profile, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    write_series(directory / "load.csv", synthetic_load(profile.year, profile.peaks, profile.means(), profile.seed))
    write_series(directory / "rt_prices.csv", synthetic_prices(profile.year, NORTH_ZONE_MEANS, profile.seed + 1))
    write_series(
        directory / "da_prices.csv", synthetic_prices(profile.year, NORTH_ZONE_MEANS, profile.seed + 2, volatility=0.10)
    )
    config = {
        "utility": profile.utility,
        "load": "load.csv",
        "real_time_prices": "rt_prices.csv",
        "day_ahead_prices": "da_prices.csv",
        "tariff": profile.tariff,
        "candidates": profile.candidates,
        "arbitrage": profile.arbitrage,
        "costs": profile.costs,
        "install_years": {"first": 2018, "last": 2030},
        "study_shave_levels": profile.study_shave_levels,
        "output": {"directory": "out", "format": "csv"},
    }
    path = directory / "scenario.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return path


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    root = Path(argv[0]) if argv else Path("fixtures")
    for profile in PROFILES.values():
        print(write_fixture(profile, root / profile.name))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
