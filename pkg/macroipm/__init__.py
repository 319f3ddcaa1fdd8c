"""
macro-ipm: entropy solutions of the macroscopic IPM equation from unstable
two-phase data, built by a level-set fixed-point iteration and checked
against a finite-volume scheme and one-dimensional minimizing movements.
"""

__version__ = "0.1.0"
