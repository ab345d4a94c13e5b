"""Exact verification of quantum and classical RL policies on explicit-state MDPs."""

__version__ = "0.1.0"
