"""A proof checker for a logical framework with coinductive types and
circular recursive definitions."""

__version__ = "0.1.0"
