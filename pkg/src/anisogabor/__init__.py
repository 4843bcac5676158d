"""Anisotropic Gabor singularity toolkit."""

__version__ = "0.1.0"
