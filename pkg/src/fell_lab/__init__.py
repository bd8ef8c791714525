"""Groupoid models of local homeomorphisms with fiberwise convolution
verification and exact integer K-theory."""

from . import conv, ktheory, scenarios, spaces

__version__ = "0.1.0"

__all__ = ["conv", "ktheory", "scenarios", "spaces", "__version__"]
