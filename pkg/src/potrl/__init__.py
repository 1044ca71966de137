"""Pot design optimization with reinforcement learning over a particle simulator."""

__version__ = "0.1.0"
