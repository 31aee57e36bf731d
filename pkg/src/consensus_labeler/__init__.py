"""Consensus labeling toolkit: multi-product raster agreement analysis,
iterative semi-automatic sample labeling, and accuracy assessment."""

__version__ = "0.1.0"
