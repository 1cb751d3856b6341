"""Exact parameter recovery for small ReLU networks from black-box queries."""

__version__ = "0.1.0"
