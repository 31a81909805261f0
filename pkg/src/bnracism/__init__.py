"""Racist-text detection for Bengali social-media comments."""

__version__ = "0.1.0"
