"""Singmaster algorithm strings: parse, format, invert, canonicalize."""

from __future__ import annotations

import re
from typing import Iterable, Sequence

from .cube import FACES, Move, SOLVED_FRAME, frame_after, physical_face

Algorithm = tuple  # tuple[Move, ...]

_TOKEN = re.compile(r"\S+")
_AXIS_OF = {"U": 0, "D": 0, "R": 1, "L": 1, "F": 2, "B": 2}
# emission order inside a group of parallel face turns
_FACE_RANK = {f: i for i, f in enumerate("UDRLFB")}


class ParseError(ValueError):
    def __init__(self, offset: int, token: str):
        super().__init__(f"unrecognised move {token!r} at byte {offset}")
        self.offset = offset
        self.token = token


def parse_algorithm(text: str) -> Algorithm:
    moves = []
    for match in _TOKEN.finditer(text):
        token = match.group()
        try:
            moves.append(Move.from_token(token))
        except ValueError:
            offset = len(text[: match.start()].encode("utf-8"))
            raise ParseError(offset, token) from None
    return tuple(moves)


def as_algorithm(alg) -> Algorithm:
    if isinstance(alg, str):
        return parse_algorithm(alg)
    return tuple(alg)


def format_algorithm(alg: Iterable[Move]) -> str:
    return " ".join(str(m) for m in alg)


def invert(alg) -> Algorithm:
    return tuple(m.inverse() for m in reversed(as_algorithm(alg)))


def htm_length(alg) -> int:
    """Half-turn metric: each face turn counts 1, rotations count 0."""
    return sum(1 for m in as_algorithm(alg) if not m.is_rotation)


def qtm_length(alg) -> int:
    return sum(2 if m.turns == 2 else 1 for m in as_algorithm(alg) if not m.is_rotation)


def rebase_rotations(alg, frame: str = SOLVED_FRAME) -> tuple[Algorithm, str]:
    """Rewrite face turns in home-face terms; return them and the final frame."""
    out = []
    for m in as_algorithm(alg):
        if m.is_rotation:
            frame = frame_after(frame, m)
        else:
            out.append(Move(physical_face(frame, m.face), m.turns))
    return tuple(out), frame


def _merge_pass(moves: Sequence[Move]) -> list[Move]:
    out: list[Move] = []
    i = 0
    while i < len(moves):
        axis = _AXIS_OF[moves[i].face]
        j = i
        totals: dict[str, int] = {}
        while j < len(moves) and _AXIS_OF[moves[j].face] == axis:
            totals[moves[j].face] = (totals.get(moves[j].face, 0) + moves[j].turns) % 4
            j += 1
        for face in sorted(totals, key=_FACE_RANK.__getitem__):
            if totals[face]:
                out.append(Move(face, totals[face]))
        i = j
    return out


def canonicalize(alg) -> Algorithm:
    """Drop rotations (relabelling later turns) and merge parallel turns.

    Runs of turns on one axis commute, so each run collapses to at most one
    turn per face, emitted in U D R L F B order. The cube's final
    orientation is not kept: the result acts identically on the cubies.
    """
    moves, _ = rebase_rotations(alg)
    moves = list(moves)
    while True:
        merged = _merge_pass(moves)
        if merged == moves:
            return tuple(merged)
        moves = merged


def translate_to_frame(alg, frame: str) -> Algorithm:
    """Express home-face turns as fixed-position tokens for a cube held in ``frame``."""
    return tuple(
        m if m.is_rotation else Move(FACES[frame.index(m.face)], m.turns)
        for m in as_algorithm(alg)
    )
