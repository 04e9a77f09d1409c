"""VulSATD: joint SATD and vulnerability detection over C functions."""

__version__ = "0.1.0"
