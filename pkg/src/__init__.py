"""
Random Covers - fixed-point statistics of random covers of a hyperbolic surface
Core module package
"""

__version__ = "1.0.0"
