"""Multiparameter sensing with scrambling dynamics: simulation and estimation."""

__version__ = "0.1.0"
