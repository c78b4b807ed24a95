"""
Grammars and parsing helpers of the model and property languages
"""
from .grammar import get_parser, names, parse_source, syntax_error

__all__ = ['get_parser', 'names', 'parse_source', 'syntax_error']
