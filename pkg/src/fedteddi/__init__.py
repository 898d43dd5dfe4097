"""Federated edge learning simulator with drift/divergence-aware client scheduling."""

__version__ = "0.1.0"
