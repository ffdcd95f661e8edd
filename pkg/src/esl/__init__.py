"""Environment-assisted classical communication: channel matrices and PSD-rank certificates."""

__version__ = "0.1.0"
