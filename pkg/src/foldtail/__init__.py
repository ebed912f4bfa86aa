"""Fold/cusp threshold crossings mapped to heavy-tailed losses, with EVT checks."""

__version__ = "0.1.0"
