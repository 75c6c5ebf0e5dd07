"""Synthetic money-laundering motif generation and graph-autoencoder detection."""

from motifgae.graph import DiGraph, LabeledGraph, PatternLabel

__version__ = "0.1.0"

__all__ = ["DiGraph", "LabeledGraph", "PatternLabel", "__version__"]
