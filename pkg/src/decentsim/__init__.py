"""Decentralization policy evaluation: allocation model, panel simulation and DiD estimation."""
__version__ = "0.1.0"
