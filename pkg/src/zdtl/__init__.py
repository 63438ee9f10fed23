"""Equivariant cross-section tilings, Rokhlin towers and counting certificates for Z^d torus rotations."""

__version__ = "0.1.0"
