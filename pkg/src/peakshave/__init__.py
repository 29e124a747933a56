"""Battery peak-shaving feasibility under a firm-hydro allocation tariff."""

__version__ = "0.1.0"
