"""Nash-stable gain allocation for coalitions of federated-learning agents."""

__version__ = "0.1.0"
