"""Monte Carlo study of homodyne-detector blinding in Gaussian-modulated CV-QKD."""

__version__ = "0.1.0"
