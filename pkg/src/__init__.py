"""regcert - brute-force certificates of metric regularity for set-valued maps."""

__version__ = "0.1.0"
