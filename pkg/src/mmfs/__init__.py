"""Embedded feature selection for nonlinear SVMs by a min-max formulation over
anisotropic Gaussian kernel weights."""

__version__ = "0.1.0"
