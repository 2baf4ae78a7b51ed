"""Learned value-function surrogates for mixed-integer bilevel problems."""

__version__ = "0.1.0"
