import sys
from pathlib import Path

import numpy as np
import pytest

from peakshave.timeseries import MW, USD_PER_MWH, HourlySeries, MonthSlice, month_hours

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "peakshave" / "data" / "fixtures"


def make_month(values, year=2018, month=1, unit=MW) -> MonthSlice:
    ts = month_hours(year, month)
    values = np.broadcast_to(np.asarray(values, dtype=float), ts.shape)
    return MonthSlice(year, month, ts, values, unit)


def make_year(per_month, year=2018, unit=MW) -> HourlySeries:
    """``per_month`` maps month number -> scalar or array of that month's values."""
    parts = [make_month(v, year, m, unit) for m, v in sorted(per_month.items())]
    return HourlySeries.concat(parts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# One summary line per acceptance criterion, printed whether or not it passed.
_acceptance: dict = {}


def pytest_runtest_logreport(report):
    if "acceptance" in report.keywords and report.when == "call":
        _acceptance[report.nodeid] = report.outcome
    elif "acceptance" in report.keywords and report.when == "setup" and report.outcome != "passed":
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _acceptance.items():
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
