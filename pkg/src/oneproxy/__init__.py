"""Hardware-aware NAS with a single proxy device."""

__version__ = "0.1.0"
