"""Resonant normal forms, invariant circles and KAM conjugacies for
foliation-preserving maps of the torus."""

__version__ = "0.1.0"
