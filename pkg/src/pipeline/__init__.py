"""Experiment orchestration: configuration, presets, grid search and reports."""
