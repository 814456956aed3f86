"""Asynchronous quantum deep Q-learning with per-worker prioritized replay."""

__version__ = "0.1.0"
