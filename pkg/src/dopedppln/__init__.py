"""SPDC design tools for doped periodically poled lithium niobate."""

__version__ = "0.1.0"
