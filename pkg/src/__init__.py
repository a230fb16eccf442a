"""tonesplat - curve-based photometric and colour correction for Gaussian splatting."""

__version__ = "0.1.0"
