"""Genetic joint transmit/receive antenna selection for MIMO multicast."""

__version__ = "0.1.0"
