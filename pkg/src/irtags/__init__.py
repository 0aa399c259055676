"""Invisible infrared-readable tags for 3D prints: embed, simulate, detect."""

__version__ = "0.1.0"
