"""Channel synthesis and learned small-cell selection from macro-array responses."""

__version__ = "0.1.0"
