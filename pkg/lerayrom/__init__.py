"""Evolve-Filter Leray model solver and POD-Galerkin reduced order models."""

__version__ = "0.1.0"
