"""
ragbench
Modular engine for running, tracing and fairly comparing retrieval-augmented
generation inference algorithms.
"""

__version__ = "0.1.0"
