"""
Batch entry points: argument parsing, run configuration and artifact writers
"""

from .main import build_parser, main

__all__ = ['build_parser', 'main']
