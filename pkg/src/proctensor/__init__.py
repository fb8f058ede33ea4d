"""Restricted process tensor tomography, memory bounds and control
optimization, validated against an exact system-environment simulator."""

__version__ = "0.1.0"
