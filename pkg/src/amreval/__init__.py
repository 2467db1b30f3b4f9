"""Similarity metrics for AMR graphs and statistics for meta-evaluating AMR parsers."""

__version__ = "0.1.0"
