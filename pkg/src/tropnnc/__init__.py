"""Tropical-geometry compression of ReLU networks and Hausdorff bound checks."""

__version__ = "0.1.0"
