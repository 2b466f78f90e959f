"""Synthesis and verification of effective multi-wave-mixing processes in coupled cavities."""

__version__ = "0.1.0"
