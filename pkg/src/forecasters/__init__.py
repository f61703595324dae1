"""Forecaster contract, prediction heads and the in-library baselines."""
