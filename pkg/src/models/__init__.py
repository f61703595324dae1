"""Domain types for series, models, calibration and experiments."""
