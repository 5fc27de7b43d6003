"""Exact 3x3 cube state: cubie representation, moves, facelets and rendering.

Conventions follow the usual two-phase-solver layout. Corners are indexed
URF, UFL, ULB, UBR, DFR, DLF, DBL, DRB and edges UR, UF, UL, UB, DR, DF, DL,
DB, FR, FL, BL, BR. A facelet string lists the faces U, R, F, D, L, B, nine
stickers each, row-major as seen when looking at that face (U with B at the
top, D with F at the top, side faces with U at the top).

Whole-cube rotations (x, y, z) never touch the cubies. They change the
``frame``: the six centre letters as seen at the fixed positions U R F D L B.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

FACES = "URFDLB"
AXES = "xyz"
TOKENS_FACES = FACES + AXES
SOLVED_FRAME = "URFDLB"

URF, UFL, ULB, UBR, DFR, DLF, DBL, DRB = range(8)
UR, UF, UL, UB, DR, DF, DL, DB, FR, FL, BL, BR = range(12)

CORNER_NAMES = ("URF", "UFL", "ULB", "UBR", "DFR", "DLF", "DBL", "DRB")
EDGE_NAMES = ("UR", "UF", "UL", "UB", "DR", "DF", "DL", "DB", "FR", "FL", "BL", "BR")

# facelet index of each sticker of each corner/edge slot, in orientation order
CORNER_FACELET = (
    (8, 9, 20), (6, 18, 38), (0, 36, 47), (2, 45, 11),
    (29, 26, 15), (27, 44, 24), (33, 53, 42), (35, 17, 51),
)
EDGE_FACELET = (
    (5, 10), (7, 19), (3, 37), (1, 46), (32, 16), (28, 25),
    (30, 43), (34, 52), (23, 12), (21, 41), (50, 39), (48, 14),
)
CORNER_COLOR = tuple(tuple(n) for n in ("URF", "UFL", "ULB", "UBR", "DFR", "DLF", "DBL", "DRB"))
EDGE_COLOR = tuple(tuple(n) for n in EDGE_NAMES)
CENTER_FACELET = (4, 13, 22, 31, 40, 49)


class CubeError(ValueError):
    pass


class MalformedFacelets(CubeError):
    """Facelet string with the wrong length, alphabet or colour counts."""


class UnsolvableState(CubeError):
    """Well-formed stickers that no sequence of face turns can produce."""


class UnknownPredicate(CubeError):
    pass


@dataclass(frozen=True)
class Move:
    """A face turn or whole-cube rotation; ``turns`` is 1 (cw), 2 or 3 (ccw)."""

    face: str
    turns: int = 1

    def __post_init__(self):
        if self.face not in TOKENS_FACES:
            raise ValueError(f"unknown face or axis {self.face!r}")
        if self.turns not in (1, 2, 3):
            raise ValueError(f"turns must be 1, 2 or 3, got {self.turns!r}")

    @property
    def is_rotation(self) -> bool:
        return self.face in AXES

    def inverse(self) -> "Move":
        return Move(self.face, 4 - self.turns)

    def __str__(self) -> str:
        return self.face + ("", "", "2", "'")[self.turns]

    @classmethod
    def from_token(cls, token: str) -> "Move":
        if not token or token[0] not in TOKENS_FACES:
            raise ValueError(f"bad move token {token!r}")
        suffix = {"": 1, "2": 2, "'": 3}.get(token[1:])
        if suffix is None:
            raise ValueError(f"bad move token {token!r}")
        return cls(token[0], suffix)


ALL_MOVES = tuple(Move(f, t) for f in TOKENS_FACES for t in (1, 3, 2))
FACE_MOVES = tuple(m for m in ALL_MOVES if not m.is_rotation)
# the 15 canonical instructions: quarter turns of each face plus x, y, z
BASIC_INSTRUCTIONS = tuple(Move(f, t) for f in FACES for t in (1, 3)) + tuple(
    Move(a, 1) for a in AXES
)

# Basic face turns in "is replaced by" form: new.cp[i] = old.cp[cp[i]].
_BASIC_CUBIE = {
    "U": ((UBR, URF, UFL, ULB, DFR, DLF, DBL, DRB), (0,) * 8,
          (UB, UR, UF, UL, DR, DF, DL, DB, FR, FL, BL, BR), (0,) * 12),
    "R": ((DFR, UFL, ULB, URF, DRB, DLF, DBL, UBR), (2, 0, 0, 1, 1, 0, 0, 2),
          (FR, UF, UL, UB, BR, DF, DL, DB, DR, FL, BL, UR), (0,) * 12),
    "F": ((UFL, DLF, ULB, UBR, URF, DFR, DBL, DRB), (1, 2, 0, 0, 2, 1, 0, 0),
          (UR, FL, UL, UB, DR, FR, DL, DB, UF, DF, BL, BR), (0, 1, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0)),
    "D": ((URF, UFL, ULB, UBR, DLF, DBL, DRB, DFR), (0,) * 8,
          (UR, UF, UL, UB, DF, DL, DB, DR, FR, FL, BL, BR), (0,) * 12),
    "L": ((URF, ULB, DBL, UBR, DFR, UFL, DLF, DRB), (0, 1, 2, 0, 0, 2, 1, 0),
          (UR, UF, BL, UB, DR, DF, FL, DB, FR, UL, DL, BR), (0,) * 12),
    "B": ((URF, UFL, UBR, DRB, DFR, DLF, ULB, DBL), (0, 0, 1, 2, 0, 0, 2, 1),
          (UR, UF, UL, BR, DR, DF, DL, BL, FR, FL, UB, DB), (0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 1)),
}


@dataclass(frozen=True)
class CubieState:
    """Corner/edge permutation and orientation plus the viewing frame.

    ``cp[i]`` is the corner piece sitting in slot ``i`` and ``co[i]`` its
    twist; likewise ``ep``/``eo`` for edges. ``frame`` holds the centre
    letters at the fixed positions U, R, F, D, L, B.
    """

    cp: tuple = tuple(range(8))
    co: tuple = (0,) * 8
    ep: tuple = tuple(range(12))
    eo: tuple = (0,) * 12
    frame: str = SOLVED_FRAME

    def multiply(self, other: "CubieState") -> "CubieState":
        """Cubie product ``self * other`` (apply ``other`` after ``self``); frame kept."""
        cp = tuple(self.cp[j] for j in other.cp)
        co = tuple((self.co[j] + o) % 3 for j, o in zip(other.cp, other.co))
        ep = tuple(self.ep[j] for j in other.ep)
        eo = tuple((self.eo[j] + o) % 2 for j, o in zip(other.ep, other.eo))
        return CubieState(cp, co, ep, eo, self.frame)

    def inverse(self) -> "CubieState":
        cp = [0] * 8
        co = [0] * 8
        for i, j in enumerate(self.cp):
            cp[j] = i
        for i in range(8):
            co[i] = (-self.co[cp[i]]) % 3
        ep = [0] * 12
        eo = [0] * 12
        for i, j in enumerate(self.ep):
            ep[j] = i
        for i in range(12):
            eo[i] = self.eo[ep[i]]
        return CubieState(tuple(cp), tuple(co), tuple(ep), tuple(eo), self.frame)

    def normalized(self) -> "CubieState":
        """The same physical cube viewed in the home frame."""
        if self.frame == SOLVED_FRAME:
            return self
        return CubieState(self.cp, self.co, self.ep, self.eo)

    def with_frame(self, frame: str) -> "CubieState":
        return CubieState(self.cp, self.co, self.ep, self.eo, frame)

    def is_valid(self) -> bool:
        try:
            verify(self)
        except UnsolvableState:
            return False
        return True


def _basic_states() -> dict[str, CubieState]:
    out = {}
    for face, (cp, co, ep, eo) in _BASIC_CUBIE.items():
        s = CubieState(cp, co, ep, eo)
        out[face + "1"] = s
        out[face + "2"] = s.multiply(s)
        out[face + "3"] = out[face + "2"].multiply(s)
    return out


MOVE_CUBIES = _basic_states()


def identity() -> CubieState:
    return CubieState()


def permutation_parity(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    parity = 0
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def verify(state: CubieState) -> None:
    """Raise UnsolvableState unless ``state`` is reachable by face turns."""
    if sorted(state.cp) != list(range(8)) or sorted(state.ep) != list(range(12)):
        raise UnsolvableState("corner or edge permutation is not a bijection")
    if any(o not in (0, 1, 2) for o in state.co) or any(o not in (0, 1) for o in state.eo):
        raise UnsolvableState("orientation value out of range")
    if sum(state.co) % 3:
        raise UnsolvableState(f"twisted corner (twist sum = {sum(state.co) % 3} mod 3)")
    if sum(state.eo) % 2:
        raise UnsolvableState("flipped edge (flip sum is odd)")
    if permutation_parity(state.cp) != permutation_parity(state.ep):
        raise UnsolvableState("corner and edge permutation parities differ")
    if state.frame not in _frames():
        raise UnsolvableState(f"centre arrangement {state.frame!r} is not a rotation")


# --- whole-cube geometry -------------------------------------------------
#
# Each sticker gets a position on the 3x3x3 grid (coordinates in -1..1,
# x towards R, y towards U, z towards F) and an outward normal. Turning a
# layer rotates positions and normals; reading the permutation back off the
# geometry gives facelet permutations for any face turn or rotation.

_NORMALS = {"U": (0, 1, 0), "R": (1, 0, 0), "F": (0, 0, 1),
            "D": (0, -1, 0), "L": (-1, 0, 0), "B": (0, 0, -1)}


def _sticker_position(face: str, row: int, col: int) -> tuple[int, int, int]:
    if face == "U":
        return (col - 1, 1, row - 1)
    if face == "R":
        return (1, 1 - row, 1 - col)
    if face == "F":
        return (col - 1, 1 - row, 1)
    if face == "D":
        return (col - 1, -1, 1 - row)
    if face == "L":
        return (-1, 1 - row, col - 1)
    return (1 - col, 1 - row, -1)


@lru_cache(maxsize=None)
def _sticker_table() -> dict:
    table = {}
    for f_index, face in enumerate(FACES):
        for k in range(9):
            key = (_sticker_position(face, k // 3, k % 3), _NORMALS[face])
            table[key] = f_index * 9 + k
    return table


def _rotate(vec, axis: int):
    # clockwise quarter turn seen from the positive end of ``axis``
    x, y, z = vec
    if axis == 0:
        return (x, z, -y)
    if axis == 1:
        return (-z, y, x)
    return (y, -x, z)


_FACE_AXIS = {"U": (1, 1), "D": (1, -1), "R": (0, 1), "L": (0, -1), "F": (2, 1), "B": (2, -1)}
_ROT_AXIS = {"x": 0, "y": 1, "z": 2}


@lru_cache(maxsize=None)
def facelet_permutation(token: str) -> tuple[int, ...]:
    """Pull permutation ``new[i] = old[perm[i]]`` for one token, from geometry."""
    move = Move.from_token(token)
    if move.is_rotation:
        axis, sign, layer = _ROT_AXIS[move.face], 1, None
    else:
        (axis, sign), layer = _FACE_AXIS[move.face], _FACE_AXIS[move.face][1]
    quarter = move.turns if sign > 0 else (4 - move.turns) % 4
    table = _sticker_table()
    perm = [0] * 54
    for (pos, normal), src in table.items():
        p, n = pos, normal
        if layer is None or pos[axis] == layer:
            for _ in range(quarter):
                p, n = _rotate(p, axis), _rotate(n, axis)
        perm[table[(p, n)]] = src
    return tuple(perm)


def permute_facelets(stickers: str, perm: Sequence[int]) -> str:
    return "".join(stickers[j] for j in perm)


@lru_cache(maxsize=None)
def _frames() -> dict[str, tuple[int, ...]]:
    """All 24 frames, keyed by centre letters, mapped to their facelet permutation."""
    start = tuple(range(54))
    key = lambda p: "".join(SOLVED_FRAME[p[c] // 9] for c in CENTER_FACELET)
    seen = {key(start): start}
    queue = [start]
    while queue:
        perm = queue.pop(0)
        for axis in AXES:
            rot = facelet_permutation(axis)
            nxt = tuple(perm[r] for r in rot)
            k = key(nxt)
            if k not in seen:
                seen[k] = nxt
                queue.append(nxt)
    return seen


def frame_after(frame: str, rotation: Move) -> str:
    perm = _frames()[frame]
    rot = facelet_permutation(str(rotation))
    return "".join(SOLVED_FRAME[perm[rot[c]] // 9] for c in CENTER_FACELET)


def physical_face(frame: str, face: str) -> str:
    """Home face currently sitting at fixed position ``face``."""
    return frame[FACES.index(face)]


def fixed_position(frame: str, home_face: str) -> str:
    """Fixed position currently showing home face ``home_face``."""
    return FACES[frame.index(home_face)]


def all_frames() -> list[str]:
    return sorted(_frames())


# --- moves ---------------------------------------------------------------

def apply_move(state: CubieState, move: Move | str) -> CubieState:
    if isinstance(move, str):
        move = Move.from_token(move)
    if move.is_rotation:
        return state.with_frame(frame_after(state.frame, move))
    home = physical_face(state.frame, move.face)
    return state.multiply(MOVE_CUBIES[f"{home}{move.turns}"])


def apply_algorithm(state: CubieState, alg) -> CubieState:
    """Left fold of :func:`apply_move`; ``alg`` may be text or a sequence of moves."""
    if isinstance(alg, str):
        from .notation import parse_algorithm

        alg = parse_algorithm(alg)
    for move in alg:
        state = apply_move(state, move)
    return state


# --- facelets ------------------------------------------------------------

SOLVED_FACELETS = "".join(f * 9 for f in FACES)


def to_facelets(state: CubieState) -> str:
    out = list(SOLVED_FACELETS)
    for i in range(8):
        j, ori = state.cp[i], state.co[i]
        for n in range(3):
            out[CORNER_FACELET[i][(n + ori) % 3]] = CORNER_COLOR[j][n]
    for i in range(12):
        j, ori = state.ep[i], state.eo[i]
        for n in range(2):
            out[EDGE_FACELET[i][(n + ori) % 2]] = EDGE_COLOR[j][n]
    base = "".join(out)
    if state.frame == SOLVED_FRAME:
        return base
    return permute_facelets(base, _frames()[state.frame])


def check_facelets(stickers: str) -> None:
    if not isinstance(stickers, str) or len(stickers) != 54:
        raise MalformedFacelets(f"expected 54 stickers, got {len(stickers) if isinstance(stickers, str) else type(stickers).__name__}")
    bad = set(stickers) - set(FACES)
    if bad:
        raise MalformedFacelets(f"unknown colour labels {sorted(bad)}")
    for f in FACES:
        if stickers.count(f) != 9:
            raise MalformedFacelets(f"colour {f} appears {stickers.count(f)} times, expected 9")
    centers = [stickers[c] for c in CENTER_FACELET]
    if len(set(centers)) != 6:
        raise MalformedFacelets("face centres are not pairwise distinct")


def from_facelets(stickers: str) -> CubieState:
    check_facelets(stickers)
    frame = "".join(stickers[c] for c in CENTER_FACELET)
    frames = _frames()
    if frame not in frames:
        raise UnsolvableState(f"centre arrangement {frame!r} is a mirror image")
    base = list(stickers)
    if frame != SOLVED_FRAME:
        for i, j in enumerate(frames[frame]):
            base[j] = stickers[i]
    cp, co, ep, eo = [0] * 8, [0] * 8, [0] * 12, [0] * 12
    for i in range(8):
        faces = [base[f] for f in CORNER_FACELET[i]]
        ori = next((k for k in range(3) if faces[k] in "UD"), None)
        if ori is None:
            raise UnsolvableState(f"corner slot {CORNER_NAMES[i]} has no U/D sticker")
        col1, col2 = faces[(ori + 1) % 3], faces[(ori + 2) % 3]
        for j in range(8):
            if col1 == CORNER_COLOR[j][1] and col2 == CORNER_COLOR[j][2]:
                cp[i], co[i] = j, ori
                break
        else:
            raise UnsolvableState(f"corner slot {CORNER_NAMES[i]} holds no real corner")
    for i in range(12):
        a, b = base[EDGE_FACELET[i][0]], base[EDGE_FACELET[i][1]]
        for j in range(12):
            if (a, b) == EDGE_COLOR[j]:
                ep[i], eo[i] = j, 0
                break
            if (b, a) == EDGE_COLOR[j]:
                ep[i], eo[i] = j, 1
                break
        else:
            raise UnsolvableState(f"edge slot {EDGE_NAMES[i]} holds no real edge")
    state = CubieState(tuple(cp), tuple(co), tuple(ep), tuple(eo), frame)
    verify(state)
    return state


# --- goal predicates -----------------------------------------------------

STAGE_VOCABULARY = ("cross", "first_layer", "first_two_layers", "last_layer_oriented", "solved")


def _pieces_home(state: CubieState, corners: Iterable[int], edges: Iterable[int]) -> bool:
    return all(state.cp[i] == i and state.co[i] == 0 for i in corners) and all(
        state.ep[i] == i and state.eo[i] == 0 for i in edges
    )


def stage_satisfied(state: CubieState, predicate: str) -> bool:
    """Evaluate a stage predicate; the first layer is D, the last layer U."""
    if predicate not in STAGE_VOCABULARY:
        raise UnknownPredicate(predicate)
    cross = _pieces_home(state, (), (DR, DF, DL, DB))
    if predicate == "cross" or not cross:
        return cross
    if not _pieces_home(state, (DFR, DLF, DBL, DRB), ()):
        return False
    if predicate == "first_layer":
        return True
    if not _pieces_home(state, (), (FR, FL, BL, BR)):
        return False
    if predicate == "first_two_layers":
        return True
    oriented = not any(state.co[:4]) and not any(state.eo[:4])
    if predicate == "last_layer_oriented" or not oriented:
        return oriented
    return state.cp == tuple(range(8)) and state.ep == tuple(range(12))


def is_solved(state: CubieState) -> bool:
    return state.cp == tuple(range(8)) and state.ep == tuple(range(12)) and not any(
        state.co
    ) and not any(state.eo)


# --- rendering -----------------------------------------------------------

def render_net(stickers: str) -> str:
    """ASCII unfolded net: U on top, then L F R B in a row, D below."""
    check_facelets(stickers)
    face = {f: stickers[9 * i: 9 * i + 9] for i, f in enumerate(FACES)}
    rows = []
    pad = " " * 8
    for r in range(3):
        rows.append(pad + " ".join(face["U"][3 * r: 3 * r + 3]))
    for r in range(3):
        rows.append("  ".join(" ".join(face[f][3 * r: 3 * r + 3]) for f in "LFRB"))
    for r in range(3):
        rows.append(pad + " ".join(face["D"][3 * r: 3 * r + 3]))
    return "\n".join(rows) + "\n"


def random_state(rng: np.random.Generator) -> CubieState:
    """Uniformly random reachable state in the home frame."""
    cp = list(rng.permutation(8))
    ep = list(rng.permutation(12))
    if permutation_parity(cp) != permutation_parity(ep):
        ep[0], ep[1] = ep[1], ep[0]
    co = list(rng.integers(0, 3, 8))
    co[7] = (-sum(co[:7])) % 3
    eo = list(rng.integers(0, 2, 12))
    eo[11] = sum(eo[:11]) % 2
    return CubieState(tuple(int(v) for v in cp), tuple(int(v) for v in co),
                      tuple(int(v) for v in ep), tuple(int(v) for v in eo))
