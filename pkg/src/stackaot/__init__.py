"""Ahead-of-time compilation of stack bytecode to a small 8-bit register machine."""

__version__ = "0.1.0"
