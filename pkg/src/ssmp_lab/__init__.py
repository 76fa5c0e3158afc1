"""Markov additive processes, conditioned self-similar Markov processes,
and the Monte Carlo harnesses that verify their first-passage and
exponential-functional laws."""

__version__ = "0.1.0"
