"""Exploratory factor analysis of cell-level mobile traffic KPIs."""

__version__ = "0.1.0"
