"""Learning per-agent reward machines in cooperative multi-agent tasks."""

__version__ = "0.1.0"
