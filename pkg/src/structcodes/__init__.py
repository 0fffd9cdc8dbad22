"""Structured random codes for computing functions over multiple-access channels and networks."""

__version__ = "0.1.0"

from .errors import StructCodesError  # noqa: E402

__all__ = ["StructCodesError", "__version__"]
