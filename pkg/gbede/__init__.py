"""gbede - minimum B-exponential divergence estimation."""

__version__ = "0.1.0"
