"""Federated text-to-SQL toolkit over database tables and tabular HTTP APIs."""

__version__ = "0.1.0"
