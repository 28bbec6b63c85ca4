from .dsl import format_theory, parse
from .theory import Theory, builtin_theory, load_theory, parse_theory

version = "0.1.0"

__all__ = [
    "Theory",
    "builtin_theory",
    "format_theory",
    "load_theory",
    "parse",
    "parse_theory",
    "version",
]
