"""cflkit: symbolic tools for flag systems, Goursat normal forms, symmetry
reduction of control systems, and cascade feedback linearization tests."""

__version__ = "0.1.0"
