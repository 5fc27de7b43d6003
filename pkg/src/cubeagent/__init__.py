"""Rubik's-cube agent: exact cube engine, solvers, memory stream, dual-loop agent and harness."""

from .cube import (
    CubieState, Move, apply_algorithm, apply_move, from_facelets, identity, is_solved,
    stage_satisfied, to_facelets,
)
from .notation import canonicalize, format_algorithm, invert, parse_algorithm

__version__ = "0.1.0"

__all__ = [
    "CubieState", "Move", "apply_algorithm", "apply_move", "canonicalize", "format_algorithm",
    "from_facelets", "identity", "invert", "is_solved", "parse_algorithm", "stage_satisfied",
    "to_facelets",
]
