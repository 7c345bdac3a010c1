"""Explicit lower bounds for random nodal sets, with grid certificates and
Monte Carlo checks on the flat torus."""

__version__ = "0.1.0"

from .logreal import LogReal  # noqa: E402,F401
