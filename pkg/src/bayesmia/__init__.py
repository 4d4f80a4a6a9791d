"""Bayesian inference of training-set membership from post-hoc model metrics."""

__version__ = "0.1.0"
