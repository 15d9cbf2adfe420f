"""Symbolic memory-dependent manipulation tasks, an exact memory-complexity
oracle, and a numpy memory-augmented diffusion policy."""

__version__ = "0.1.0"
