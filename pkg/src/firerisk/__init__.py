"""Multi-target ordinal wildfire-risk forecasting on zone-day data."""

__version__ = "0.1.0"
