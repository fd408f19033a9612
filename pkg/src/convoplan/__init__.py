"""Natural-language task instructions to validated symbolic plans."""

__version__ = "0.1.0"
