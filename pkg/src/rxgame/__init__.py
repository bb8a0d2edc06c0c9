"""Pricing game between a drug producer, an insurer and a population of agents."""

__version__ = "0.1.0"
