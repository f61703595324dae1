"""Detectors: dominant period and the residual/context mutual-information score."""

from src.detectors.periodicity import dominant_period
from src.detectors.reconditionor import phase_context, reconditionor_score, segment_context

__all__ = ["dominant_period", "phase_context", "reconditionor_score", "segment_context"]
