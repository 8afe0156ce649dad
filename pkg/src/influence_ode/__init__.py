"""Opinion-dynamics simulation and influence-weight identification toolkit."""

__version__ = "0.1.0"
