"""Safe reinforcement learning for multi-energy dispatch with a projection safety layer."""

__version__ = "0.1.0"
