"""Simulated rig: robot primitive scripts, execution, and camera observations.

A face turn compiles to GRIP, ROTATE, RELEASE on that face; a whole-cube
rotation compiles to a single REORIENT. Observations are either the full
54-sticker string or the 27 stickers seen from one corner of the cube.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .cube import (
    AXES, CORNER_NAMES, FACES, CubieState, Move, apply_move, from_facelets, to_facelets,
)
from .notation import as_algorithm

OPS = ("GRIP", "ROTATE", "RELEASE", "REORIENT")
VIEWPOINTS = CORNER_NAMES
HIDDEN = "."


class ScriptError(ValueError):
    pass


class ConflictError(ValueError):
    pass


@dataclass(frozen=True)
class Primitive:
    op: str
    face: Optional[str] = None
    axis: Optional[str] = None
    q: Optional[int] = None

    def __post_init__(self):
        if self.op not in OPS:
            raise ScriptError(f"unknown primitive {self.op!r}")
        if self.op == "REORIENT":
            if self.axis not in tuple(AXES) or self.q not in (1, 2, 3):
                raise ScriptError(f"bad REORIENT({self.axis}, {self.q})")
        else:
            if self.face not in tuple(FACES):
                raise ScriptError(f"bad face {self.face!r} for {self.op}")
            if (self.op == "ROTATE") != (self.q is not None) or (self.q is not None and self.q not in (1, 2, 3)):
                raise ScriptError(f"bad quarter-turn count {self.q!r} for {self.op}")

    def __str__(self):
        if self.op == "REORIENT":
            return f"REORIENT({self.axis},{self.q})"
        if self.op == "ROTATE":
            return f"ROTATE({self.face},{self.q})"
        return f"{self.op}({self.face})"

    def to_dict(self) -> dict:
        d = {"op": self.op}
        if self.face is not None:
            d["face"] = self.face
        if self.axis is not None:
            d["axis"] = self.axis
        if self.q is not None:
            d["q"] = self.q
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Primitive":
        return cls(d["op"], d.get("face"), d.get("axis"), d.get("q"))


def GRIP(face):
    return Primitive("GRIP", face=face)


def ROTATE(face, q):
    return Primitive("ROTATE", face=face, q=q)


def RELEASE(face):
    return Primitive("RELEASE", face=face)


def REORIENT(axis, q):
    return Primitive("REORIENT", axis=axis, q=q)


RobotScript = list  # list[Primitive]


def compile_script(alg) -> RobotScript:
    out = []
    for m in as_algorithm(alg):
        if m.is_rotation:
            out.append(REORIENT(m.face, m.turns))
        else:
            out += [GRIP(m.face), ROTATE(m.face, m.turns), RELEASE(m.face)]
    return out


def simulate(script: Iterable[Primitive], state: CubieState) -> CubieState:
    gripped: set = set()
    for i, p in enumerate(script):
        if p.op == "GRIP":
            if p.face in gripped:
                raise ScriptError(f"primitive {i}: {p.face} is already gripped")
            gripped.add(p.face)
        elif p.op == "RELEASE":
            if p.face not in gripped:
                raise ScriptError(f"primitive {i}: RELEASE({p.face}) without GRIP")
            gripped.discard(p.face)
        elif p.op == "ROTATE":
            if p.face not in gripped:
                raise ScriptError(f"primitive {i}: ROTATE({p.face}) without GRIP")
            state = apply_move(state, Move(p.face, p.q))
        else:
            if gripped:
                raise ScriptError(f"primitive {i}: REORIENT while gripping {sorted(gripped)}")
            state = apply_move(state, Move(p.axis, p.q))
    if gripped:
        raise ScriptError(f"script ends with {sorted(gripped)} still gripped")
    return state


def script_to_jsonl(script: Iterable[Primitive]) -> str:
    return "".join(json.dumps(p.to_dict()) + "\n" for p in script)


def script_from_jsonl(text: str) -> RobotScript:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(Primitive.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ScriptError(f"line {n}: {exc}") from None
    return out


# --- observations --------------------------------------------------------

@dataclass(frozen=True)
class Observation:
    mode: str
    stickers: str  # 54 chars, HIDDEN where not visible
    viewpoint: Optional[str] = None

    @property
    def visible_count(self) -> int:
        return sum(1 for c in self.stickers if c != HIDDEN)

    def faces(self) -> str:
        return "".join(f for i, f in enumerate(FACES)
                       if self.stickers[9 * i] != HIDDEN)


@dataclass(frozen=True)
class Incomplete:
    missing_count: int


def observe(state: CubieState, mode: str = "full", viewpoint: str | None = None) -> Observation:
    stickers = to_facelets(state)
    if mode == "full":
        return Observation("full", stickers)
    if mode != "partial":
        raise ValueError(f"unknown observation mode {mode!r}")
    if viewpoint not in VIEWPOINTS:
        raise ValueError(f"viewpoint must be one of {VIEWPOINTS}")
    shown = "".join(stickers[9 * i: 9 * i + 9] if f in viewpoint else HIDDEN * 9
                    for i, f in enumerate(FACES))
    return Observation("partial", shown, viewpoint)


def reconstruct(observations: Iterable[Observation]):
    """Merge observations of one unchanged state; facelets once all 54 are seen."""
    merged = [HIDDEN] * 54
    for obs in observations:
        for i, c in enumerate(obs.stickers):
            if c == HIDDEN:
                continue
            if merged[i] not in (HIDDEN, c):
                raise ConflictError(f"sticker {i} seen as {merged[i]} and {c}")
            merged[i] = c
    missing = merged.count(HIDDEN)
    if missing:
        return Incomplete(missing)
    return "".join(merged)


class Rig:
    """A cube on the simulated rig: executes scripts and answers camera requests."""

    def __init__(self, state: CubieState, mode: str = "full"):
        self.state = state
        self.mode = mode
        self.scripts: list[RobotScript] = []

    def execute(self, alg) -> CubieState:
        script = compile_script(alg)
        self.state = simulate(script, self.state)
        self.scripts.append(script)
        return self.state

    def observe(self, viewpoint: str | None = None) -> Observation:
        return observe(self.state, self.mode, viewpoint)

    def look_around(self) -> str:
        """Full facelets, from two opposite corners when the camera is partial."""
        if self.mode == "full":
            return self.observe().stickers
        result = reconstruct([self.observe("URF"), self.observe("DBL")])
        assert isinstance(result, str)
        return result

    def current(self) -> CubieState:
        return from_facelets(self.look_around())
