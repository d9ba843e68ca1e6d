"""Safe actor-critic-identifier control with barrier Lyapunov functions."""

__version__ = "0.1.0"
