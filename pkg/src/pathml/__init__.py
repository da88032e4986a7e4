"""SCION path measurement campaigns, ML-ready datasets and baseline benchmarks."""

__version__ = "0.1.0"
