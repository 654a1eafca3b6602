"""Optimal-transport sensitivity analysis and a simplified DACCS deployment simulator."""

__version__ = "0.1.0"
