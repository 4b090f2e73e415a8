"""Eye-movement biometric identification from laser-feedback velocity and distance signals."""

__version__ = "0.1.0"
