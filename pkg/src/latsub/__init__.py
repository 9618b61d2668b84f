"""latsub: exact-arithmetic analysis of lattice substitution multiset systems."""

__version__ = "0.1.0"
