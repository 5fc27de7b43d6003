"""Coordinates, move tables and pruning tables, with an on-disk cache.

Two families of tables live here.

Coordinate tables drive the two-phase solver: corner twist (3^7), edge flip
(2^11), E-slice placement (C(12,4)), corner permutation (8!), U/D-edge
permutation inside <U,D,R2,L2,F2,B2> (8!) and E-slice permutation (4!).

Piece tables track a handful of pieces by (slot, orientation), each packed
as a base-24 digit. They give exact distances for the layered stages and
admissible bounds for the bounded-optimal search.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .cube import FACES, MOVE_CUBIES, CubieState

log = logging.getLogger(__name__)

TABLE_VERSION = "cubeagent-tables-5"

N_MOVES = 18
N_TWIST, N_FLIP, N_SLICE = 2187, 2048, 495
N_PERM8, N_PERM4 = 40320, 24
# move index = 3 * face + (turns - 1), faces in U R F D L B order
MOVE_NAMES = tuple(f + s for f in FACES for s in ("", "2", "'"))
PHASE2_MOVES = np.array([0, 1, 2, 4, 7, 9, 10, 11, 13, 16], dtype=np.int64)

# pieces: 0-7 corners URF..DRB, 8-19 edges UR..BR
CROSS = (12, 13, 14, 15)           # DR DF DL DB
D_CORNERS = (4, 5, 6, 7)           # DFR DLF DBL DRB
E_EDGES = (16, 17, 18, 19)         # FR FL BL BR
U_CORNERS = (0, 1, 2, 3)
U_EDGES = (8, 9, 10, 11)


def move_index(face: str, turns: int) -> int:
    return 3 * FACES.index(face) + turns - 1


def _move_arrays():
    cp = np.zeros((N_MOVES, 8), np.int64)
    co = np.zeros((N_MOVES, 8), np.int64)
    ep = np.zeros((N_MOVES, 12), np.int64)
    eo = np.zeros((N_MOVES, 12), np.int64)
    for f in FACES:
        for t in (1, 2, 3):
            m = move_index(f, t)
            s = MOVE_CUBIES[f"{f}{t}"]
            cp[m], co[m], ep[m], eo[m] = s.cp, s.co, s.ep, s.eo
    return cp, co, ep, eo


MCP, MCO, MEP, MEO = _move_arrays()


# --- coordinate encodings ------------------------------------------------

def _factorials(n):
    return np.array([math.factorial(i) for i in range(n + 1)], np.int64)


def rank_perms(perms: np.ndarray) -> np.ndarray:
    """Lexicographic rank of each row of ``perms`` (values 0..n-1)."""
    perms = np.asarray(perms, np.int64)
    n = perms.shape[1]
    fact = _factorials(n)
    rank = np.zeros(perms.shape[0], np.int64)
    for i in range(n):
        smaller = (perms[:, i + 1:] < perms[:, i: i + 1]).sum(axis=1)
        rank += smaller * fact[n - 1 - i]
    return rank


def all_perms(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), np.int64)


def twist_coord(co) -> int:
    return int(sum(int(co[i]) * 3 ** i for i in range(7)))


def flip_coord(eo) -> int:
    return int(sum(int(eo[i]) << i for i in range(11)))


def _slice_rank_table():
    masks = [sum(1 << p for p in c) for c in itertools.combinations(range(12), 4)]
    rank = np.full(4096, -1, np.int64)
    for r, m in enumerate(masks):
        rank[m] = r
    return rank, np.array(masks, np.int64)


SLICE_RANK, SLICE_MASK = _slice_rank_table()
SLICE_SOLVED = int(SLICE_RANK[0b111100000000])


def slice_coord(ep) -> int:
    return int(SLICE_RANK[sum(1 << i for i in range(12) if ep[i] >= 8)])


def perm_rank(perm) -> int:
    return int(rank_perms(np.asarray([perm]))[0])


def coords(state: CubieState) -> dict[str, int]:
    out = {
        "twist": twist_coord(state.co),
        "flip": flip_coord(state.eo),
        "slice": slice_coord(state.ep),
        "cperm": perm_rank(state.cp),
    }
    return out


def piece_vector(state: CubieState) -> np.ndarray:
    """Piece-centric encoding: value = slot*3+twist for corners, slot*2+flip for edges."""
    v = np.zeros(20, np.int64)
    for slot in range(8):
        v[state.cp[slot]] = slot * 3 + state.co[slot]
    for slot in range(12):
        v[8 + state.ep[slot]] = slot * 2 + state.eo[slot]
    return v


def piece_move_tables():
    cmove = np.zeros((N_MOVES, 24), np.int64)
    emove = np.zeros((N_MOVES, 24), np.int64)
    for m in range(N_MOVES):
        for i in range(8):
            j = MCP[m, i]
            for o in range(3):
                cmove[m, j * 3 + o] = i * 3 + (o + MCO[m, i]) % 3
        for i in range(12):
            j = MEP[m, i]
            for o in range(2):
                emove[m, j * 2 + o] = i * 2 + (o + MEO[m, i]) % 2
    return cmove, emove


CMOVE, EMOVE = piece_move_tables()


def _coordinate_move_tables():
    # twist
    digits = np.array([[(t // 3 ** i) % 3 for i in range(7)] for t in range(N_TWIST)], np.int64)
    co = np.concatenate([digits, (-digits.sum(1, keepdims=True)) % 3], axis=1)
    w3 = 3 ** np.arange(7)
    twist = np.stack([((co[:, MCP[m]] + MCO[m]) % 3)[:, :7] @ w3 for m in range(N_MOVES)], 1)
    # flip
    digits = np.array([[(f >> i) & 1 for i in range(11)] for f in range(N_FLIP)], np.int64)
    eo = np.concatenate([digits, digits.sum(1, keepdims=True) % 2], axis=1)
    w2 = 1 << np.arange(11)
    flip = np.stack([((eo[:, MEP[m]] + MEO[m]) % 2)[:, :11] @ w2 for m in range(N_MOVES)], 1)
    # slice placement: only which slots hold E edges matters
    occupied = ((SLICE_MASK[:, None] >> np.arange(12)) & 1).astype(np.int64)
    bits = 1 << np.arange(12)
    slc = np.stack([SLICE_RANK[occupied[:, MEP[m]] @ bits] for m in range(N_MOVES)], 1)
    # corner permutation
    perms8 = all_perms(8)
    cperm = np.stack([rank_perms(perms8[:, MCP[m]]) for m in range(N_MOVES)], 1)
    # U/D edges and slice permutation, defined for phase-2 moves only
    udperm = np.full((N_PERM8, N_MOVES), -1, np.int64)
    sperm = np.full((N_PERM4, N_MOVES), -1, np.int64)
    perms4 = all_perms(4)
    for m in PHASE2_MOVES:
        full = np.concatenate([perms8, np.tile(np.arange(8, 12), (N_PERM8, 1))], axis=1)
        udperm[:, m] = rank_perms(full[:, MEP[m]][:, :8])
        full4 = np.concatenate([np.tile(np.arange(8), (N_PERM4, 1)), perms4 + 8], axis=1)
        sperm[:, m] = rank_perms(full4[:, MEP[m]][:, 8:] - 8)
    return {"twist": twist, "flip": flip, "slice": slc, "cperm": cperm,
            "udperm": udperm, "sperm": sperm}


# --- breadth-first table construction ------------------------------------

@numba.njit(cache=True)
def _bfs_pair(mt_a, mt_b, moves, sources):
    na, nb = mt_a.shape[0], mt_b.shape[0]
    dist = np.full(na * nb, -1, np.int8)
    for s in sources:
        dist[s] = 0
    depth = 0
    filled = len(sources)
    while filled < na * nb:
        new = 0
        for idx in range(na * nb):
            if dist[idx] != depth:
                continue
            a, b = idx // nb, idx % nb
            for m in moves:
                j = mt_a[a, m] * nb + mt_b[b, m]
                if dist[j] < 0:
                    dist[j] = depth + 1
                    new += 1
        if new == 0:
            break
        filled += new
        depth += 1
    return dist


@numba.njit(cache=True)
def _bfs_pieces(kinds, cmove, emove, sources, size):
    k = kinds.shape[0]
    dist = np.full(size, -1, np.int8)
    for s in sources:
        dist[s] = 0
    digits = np.zeros(k, np.int64)
    depth = 0
    while True:
        new = 0
        for idx in range(size):
            if dist[idx] != depth:
                continue
            rest = idx
            for q in range(k):
                digits[q] = rest % 24
                rest //= 24
            for m in range(18):
                j = 0
                mult = 1
                for q in range(k):
                    if kinds[q] == 0:
                        j += cmove[m, digits[q]] * mult
                    else:
                        j += emove[m, digits[q]] * mult
                    mult *= 24
                if dist[j] < 0:
                    dist[j] = depth + 1
                    new += 1
        if new == 0:
            break
        depth += 1
    return dist


@numba.njit(cache=True)
def rank_edges6(digits) -> int:
    """Index of six edges' (slot, flip) digits: ordered slot choice * 64 + flips."""
    used = 0
    idx = 0
    ori = 0
    for i in range(6):
        slot = digits[i] >> 1
        below = 0
        for j in range(slot):
            if not (used >> j) & 1:
                below += 1
        idx = idx * (12 - i) + below
        used |= 1 << slot
        ori = ori * 2 + (digits[i] & 1)
    return idx * 64 + ori


@numba.njit(cache=True)
def _unrank_edges6(index, digits):
    ori = index % 64
    rest = index // 64
    picks = np.zeros(6, np.int64)
    for i in range(5, -1, -1):
        picks[i] = rest % (12 - i)
        rest //= 12 - i
    used = 0
    for i in range(6):
        k = picks[i]
        for slot in range(12):
            if not (used >> slot) & 1:
                if k == 0:
                    break
                k -= 1
        used |= 1 << slot
        digits[i] = slot * 2 + ((ori >> (5 - i)) & 1)


N_EDGES6 = 665280 * 64


@numba.njit(cache=True)
def _bfs_edges6(emove, source):
    dist = np.full(N_EDGES6, -1, np.int8)
    dist[source] = 0
    digits = np.zeros(6, np.int64)
    moved = np.zeros(6, np.int64)
    depth = 0
    while True:
        new = 0
        for idx in range(N_EDGES6):
            if dist[idx] != depth:
                continue
            _unrank_edges6(idx, digits)
            for m in range(18):
                for q in range(6):
                    moved[q] = emove[m, digits[q]]
                j = rank_edges6(moved)
                if dist[j] < 0:
                    dist[j] = depth + 1
                    new += 1
        if new == 0:
            break
        depth += 1
    return dist


def build_edge_table(first: int) -> np.ndarray:
    """Distance table for the six edges first..first+5 (slots and flips)."""
    home = np.array([(first + q) * 2 for q in range(6)], np.int64)
    return _bfs_edges6(EMOVE, rank_edges6(home))


def _home_digit(piece: int) -> int:
    return piece * 3 if piece < 8 else (piece - 8) * 2


def _group_sources(group, oriented_any_order: bool) -> np.ndarray:
    homes = [_home_digit(p) for p in group]
    if not oriented_any_order:
        return np.array([sum(h * 24 ** q for q, h in enumerate(homes))], np.int64)
    out = [sum(h * 24 ** q for q, h in enumerate(perm)) for perm in itertools.permutations(homes)]
    return np.array(sorted(out), np.int64)


def build_piece_table(group, oriented_any_order: bool = False) -> np.ndarray:
    kinds = np.array([0 if p < 8 else 1 for p in group], np.int64)
    sources = _group_sources(group, oriented_any_order)
    return _bfs_pieces(kinds, CMOVE, EMOVE, sources, 24 ** len(group))


# group name -> (pieces, oriented_any_order)
PIECE_GROUPS = {
    "cross": (CROSS, False),
    **{f"cross_corner{j}": (CROSS + (c,), False) for j, c in enumerate(D_CORNERS)},
    **{f"cross_edge{k}": (CROSS + (e,), False) for k, e in enumerate(E_EDGES)},
    "d_corners": (D_CORNERS, False),
    "e_edges": (E_EDGES, False),
    "u_corners": (U_CORNERS, False),
    "u_edges": (U_EDGES, False),
    "u_corners_oriented": (U_CORNERS, True),
    "u_edges_oriented": (U_EDGES, True),
}


@dataclass
class PruningTables:
    """All move and pruning tables; immutable once built."""

    moves: dict = field(default_factory=dict)
    coord: dict = field(default_factory=dict)
    pieces: dict = field(default_factory=dict)

    # the three plain distance tables: corner twist, edge flip, corner permutation
    @property
    def corner_orientation(self) -> np.ndarray:
        return self.coord["twist"]

    @property
    def edge_orientation(self) -> np.ndarray:
        return self.coord["flip"]

    @property
    def corner_permutation(self) -> np.ndarray:
        return self.coord["cperm"]

    def arrays(self) -> dict[str, np.ndarray]:
        out = {f"move_{k}": v for k, v in self.moves.items()}
        out.update({f"coord_{k}": v for k, v in self.coord.items()})
        out.update({f"piece_{k}": v for k, v in self.pieces.items()})
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "PruningTables":
        t = cls()
        for key, value in arrays.items():
            kind, _, name = key.partition("_")
            getattr(t, {"move": "moves", "coord": "coord", "piece": "pieces"}[kind])[name] = value
        return t


def build_tables() -> PruningTables:
    t = PruningTables()
    t.moves = _coordinate_move_tables()
    all_moves = np.arange(N_MOVES, dtype=np.int64)
    one = np.zeros((1, N_MOVES), np.int64)
    src0 = np.array([0], np.int64)
    mv = t.moves
    t.coord["twist"] = _bfs_pair(mv["twist"], one, all_moves, src0)
    t.coord["flip"] = _bfs_pair(mv["flip"], one, all_moves, src0)
    t.coord["cperm"] = _bfs_pair(mv["cperm"], one, all_moves, src0)
    # full corner table, cperm * 2187 + twist (88M entries)
    t.coord["corners"] = _bfs_pair(mv["cperm"], mv["twist"], all_moves, src0)
    g1 = np.array([SLICE_SOLVED], np.int64)
    t.coord["twist_slice"] = _bfs_pair(mv["twist"], mv["slice"], all_moves, g1)
    t.coord["flip_slice"] = _bfs_pair(mv["flip"], mv["slice"], all_moves, g1)
    t.coord["cperm_sperm"] = _bfs_pair(mv["cperm"], mv["sperm"], PHASE2_MOVES, src0)
    t.coord["udperm_sperm"] = _bfs_pair(mv["udperm"], mv["sperm"], PHASE2_MOVES, src0)
    # six-edge tables for the two halves of the edge set
    t.coord["edges_a"] = build_edge_table(0)
    t.coord["edges_b"] = build_edge_table(6)
    for name, (group, any_order) in PIECE_GROUPS.items():
        log.info("building piece table %s", name)
        t.pieces[name] = build_piece_table(group, any_order)
    return t


# --- cache ---------------------------------------------------------------

def cache_dir() -> Path:
    root = os.environ.get("CUBEAGENT_CACHE")
    if root:
        return Path(root)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "cubeagent"


def cache_path() -> Path:
    return cache_dir() / "tables.npz"


def load_or_build(path: Path | None = None) -> PruningTables:
    path = Path(path) if path else cache_path()
    if path.exists():
        try:
            with np.load(path, allow_pickle=False) as data:
                if str(data["__version__"]) == TABLE_VERSION:
                    return PruningTables.from_arrays(
                        {k: data[k] for k in data.files if k != "__version__"}
                    )
            log.info("table cache %s has a stale version; rebuilding", path)
        except (OSError, KeyError, ValueError) as exc:
            log.warning("unreadable table cache %s (%s); rebuilding", path, exc)
    tables = build_tables()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".{os.getpid()}.tmp.npz")
        np.savez(tmp, __version__=np.array(TABLE_VERSION), **tables.arrays())
        os.replace(tmp, path)
    except OSError as exc:
        log.warning("could not write table cache %s: %s", path, exc)
    return tables


_TABLES: PruningTables | None = None
_LOCK = threading.Lock()


def get_tables() -> PruningTables:
    """Process-wide tables, loaded from cache or built on first use."""
    global _TABLES
    if _TABLES is None:
        with _LOCK:
            if _TABLES is None:
                _TABLES = load_or_build()
    return _TABLES
