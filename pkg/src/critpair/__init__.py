"""Critical points of conditioned Gaussian random polynomials."""

__version__ = "0.1.0"
