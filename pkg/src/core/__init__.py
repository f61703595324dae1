"""Series handling: windows, splits, metrics, ingestion."""
