"""Demand forecasting, elasticity estimation and LP-based price selection."""

__version__ = "0.1.0"
