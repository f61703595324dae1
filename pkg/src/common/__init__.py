"""Shared helpers and errors."""
