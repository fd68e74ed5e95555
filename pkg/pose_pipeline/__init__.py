"""Depth-based 3D pose lifting, limb-prior recovery and residual regression."""

__version__ = "1.0.0"
