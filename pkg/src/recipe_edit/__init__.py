"""Hierarchical recipe editing: ingredient-set editing followed by step generation."""

__version__ = "0.1.0"
