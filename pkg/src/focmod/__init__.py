"""Compilers between the counting logic FOC[+;MOD] and transformer encoders."""

__version__ = "0.1.0"
