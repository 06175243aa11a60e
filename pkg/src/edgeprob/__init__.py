"""Sequential edge-probability inference for directed multigraphs."""

__version__ = "0.1.0"
