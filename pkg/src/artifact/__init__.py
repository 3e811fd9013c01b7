"""Closed elastic curves on the 2-sphere, their gradient flow and Hopf tori."""

__version__ = "0.1.0"
