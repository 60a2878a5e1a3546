"""Dynamics and arithmetic of the family lam*z/(z^2 + t*z + 1)."""

__version__ = "0.1.0"
