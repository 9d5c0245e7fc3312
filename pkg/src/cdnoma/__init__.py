"""Code-domain NOMA on top of massive MIMO: spectral-efficiency simulation."""

__version__ = "0.1.0"
