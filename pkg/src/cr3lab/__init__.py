"""Numerical lab for pseudohermitian CR structures on the 3-sphere.

Modules: fields (exact polynomial algebra on S^3), structures (coframes and the
Tanaka-Webster data), operators (weighted covariant derivatives, P1, P0),
hodge (Kohn decomposition and the pseudo-Einstein construction), analysis
(convexity and Bochner-type identities), spectral (Galerkin spectrum of P0)
and cli.
"""

__version__ = "0.1.0"
