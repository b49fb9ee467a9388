"""Front dynamics of a space-trait population model under an environmental gradient."""

__version__ = "0.1.0"
