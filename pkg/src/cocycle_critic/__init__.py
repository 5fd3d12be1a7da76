"""Finite-horizon detection of critical points and dominated splittings for
2x2 complex linear cocycles, with a complex Hénon map front end."""

__version__ = "0.1.0"
