"""Discrete min-max widths: mod-2 cycle sweepouts, Almgren detection and width bounds."""

__version__ = "0.1.0"
