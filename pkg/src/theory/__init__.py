"""Fixed-design regression oracles and synthetic CDS generators."""
