"""Numerical laboratory for the relativistic Vlasov-Maxwell system."""

__version__ = "0.1.0"
