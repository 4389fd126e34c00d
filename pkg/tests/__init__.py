"""Tests para interp-commutators."""
