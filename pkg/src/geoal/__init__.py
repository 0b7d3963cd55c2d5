"""Geometry-aware active learning for supervoxel segmentation."""

__version__ = "0.1.0"
