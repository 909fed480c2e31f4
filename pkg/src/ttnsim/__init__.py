"""Tree tensor network simulation of many-body quantum dynamics."""

__version__ = "0.1.0"
