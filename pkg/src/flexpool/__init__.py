"""Flexibility aggregation with PE zonotopes."""
