"""veil: compiler and desk-scale runtime for privacy-annotated contracts."""

__version__ = "0.2.0"

LANGUAGE_VERSION = "1.0"
