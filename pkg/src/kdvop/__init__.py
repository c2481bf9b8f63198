"""Operator learning with recurrent heads for long-time KdV integration.

Subpackages are imported lazily by the CLI so that thread-count environment
variables can be set before numpy loads; import the submodules you need
directly (``kdvop.kdv``, ``kdvop.fno``, ...).
"""

__version__ = "0.1.0"
