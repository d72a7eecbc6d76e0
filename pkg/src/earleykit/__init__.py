"""Semiring-weighted Earley parsing and grammar preprocessing."""
