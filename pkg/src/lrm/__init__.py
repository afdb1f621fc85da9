"""Low-rank mechanism for answering batches of linear counting queries under
epsilon-differential privacy."""

__version__ = "0.1.0"
