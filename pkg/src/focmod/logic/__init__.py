from . import syntax
from .alphabet import BINARY, CLS, Alphabet
from .desugar import desugar
from .parser import ParseError, SentenceFile, parse_formula, parse_sentence_file
from .printer import render_formula, render_sentence_file
from .syntax import free_variables
from .terms import CountTerm

__all__ = [
    "syntax", "Alphabet", "BINARY", "CLS", "desugar", "ParseError", "SentenceFile",
    "parse_formula", "parse_sentence_file", "render_formula", "render_sentence_file",
    "free_variables", "CountTerm",
]
