"""Exact-rational multilevel linear programming toolkit.

Instance model, Boolean-formula compilers, structure-preserving transforms,
desk-scale exact solvers, and oracle binary-search value reconstruction.
"""

__version__ = "0.1.0"
