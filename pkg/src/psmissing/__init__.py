"""Graphical and numerical analysis of outcome missingness under principal stratification."""

__version__ = "0.1.0"
