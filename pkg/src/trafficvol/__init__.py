"""Statistical characterisation of aggregated network traffic volumes."""

__version__ = "0.1.0"
