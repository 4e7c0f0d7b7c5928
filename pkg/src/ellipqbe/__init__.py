"""Block encodings of discretized elliptic operators, with classical oracles."""

__version__ = "0.1.0"
