"""Checker and interpreter for nested session types."""

__version__ = "0.1.0"
CORPUS_VERSION = "1"
