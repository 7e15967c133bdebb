"""Numerical verification kernel for pseudo-Finsler surfaces and their
anisotropic conformal changes ``Fbar = exp(phi) F``, built on truncated
Taylor jets.
"""

__version__ = "0.1.0"
