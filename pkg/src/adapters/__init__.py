"""Test-time adapters."""

from src.adapters.solid import WindowPool, run_solid

__all__ = ["WindowPool", "run_solid"]
