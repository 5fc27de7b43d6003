"""Layered solver, bounded-optimal verifier, two-phase solver and task generation."""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import search
from .cube import (
    FACES, FACE_MOVES, BASIC_INSTRUCTIONS, CubieState, Move, apply_algorithm, permutation_parity,
    identity, stage_satisfied, to_facelets, verify,
)
from .notation import canonicalize, format_algorithm, htm_length, invert, parse_algorithm
from .steps import STAGES, stage_labels
from .tables import (
    CMOVE, EMOVE, MEP, MOVE_NAMES, PHASE2_MOVES, PIECE_GROUPS, SLICE_SOLVED, TABLE_VERSION,
    cache_dir, coords, get_tables, piece_vector,
)

LEVELS = ("low", "medium", "high")
# (lower, upper) move-count band per level
BANDS = {"low": (1, 1), "medium": (9, 12), "high": (19, 31)}
MAX_OPTIMAL_CAP = 12


class BudgetExceeded(RuntimeError):
    pass


class GenerationExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class AboveCap:
    """Result of a bounded-optimal query whose true distance exceeds ``cap``."""

    cap: int


def _moves_from_indices(indices) -> tuple:
    return tuple(Move.from_token(MOVE_NAMES[int(i)]) for i in indices)


class _Engine:
    """Flattened piece tables plus the coordinate tables, ready for the kernels."""

    def __init__(self, tables=None):
        t = tables or get_tables()
        self.tables = t
        names = list(PIECE_GROUPS)
        self.index = {n: i for i, n in enumerate(names)}
        sizes = [t.pieces[n].size for n in names]
        self.offs = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        self.flat = np.concatenate([t.pieces[n] for n in names])
        self.groups = np.full((len(names), 5), 0, np.int64)
        self.gsize = np.zeros(len(names), np.int64)
        for i, n in enumerate(names):
            g = PIECE_GROUPS[n][0]
            self.groups[i, : len(g)] = g
            self.gsize[i] = len(g)
        c, m = t.coord, t.moves
        self.coord_args = (m["twist"], m["flip"], m["slice"], m["cperm"], c["twist"], c["flip"],
                           c["cperm"], c["twist_slice"], c["flip_slice"], c["corners"],
                           c["edges_a"], c["edges_b"])
        self.is_phase2 = np.zeros(18, np.bool_)
        self.is_phase2[PHASE2_MOVES] = True
        self.two_phase_args = (m["twist"], m["flip"], m["slice"], m["cperm"], m["udperm"],
                               m["sperm"], MEP, c["twist_slice"], c["flip_slice"],
                               c["cperm_sperm"], c["udperm_sperm"], PHASE2_MOVES, self.is_phase2)

    def ida(self, state: CubieState, goal_tables, extra_tables=(), coord_flags=0,
            max_depth=search.MAX_DEPTH - 1, max_nodes=10 ** 12, prev=-1):
        sel = [self.index[n] for n in goal_tables] + [self.index[n] for n in extra_tables]
        goal = [1] * len(goal_tables) + [0] * len(extra_tables)
        k = coords(state)
        status, path, nodes = search.piece_ida(
            piece_vector(state), k["twist"], k["flip"], k["slice"], k["cperm"], prev,
            max_depth, max_nodes, CMOVE, EMOVE, self.flat, self.offs,
            self.groups, self.gsize, np.array(sel, np.int64), np.array(goal, np.int64),
            coord_flags, *self.coord_args)
        if status == search.NODE_LIMIT:
            raise BudgetExceeded(f"search exceeded {max_nodes} nodes")
        if status == search.NOT_FOUND:
            return None
        return _moves_from_indices(path)

    def heuristic(self, state: CubieState, names, coord_flags=0) -> int:
        sel = np.array([self.index[n] for n in names], np.int64)
        k = coords(state)
        h, _ = search._bound(piece_vector(state)[None, :], 0, k["twist"], k["flip"], k["slice"], k["cperm"],
                             1000, self.flat, self.offs, self.groups, self.gsize, sel,
                             np.zeros(len(names), np.int64), coord_flags, *self.coord_args[4:])
        return int(h)


@lru_cache(maxsize=1)
def engine() -> _Engine:
    eng = _Engine()
    # compile the kernels now so time budgets never pay for it
    eng.ida(identity(), ("cross",))
    search.two_phase(0, 0, SLICE_SOLVED, 0, np.arange(12, dtype=np.int64), -1, 0, 10, 1000,
                     *eng.two_phase_args)
    return eng


# every coordinate table; all of them read zero only on the solved cube, so
# they double as the goal test for optimal search
ALL_COORDS = 15
SOLVED_GOAL = tuple(f"cross_corner{j}" for j in range(4)) + tuple(
    f"cross_edge{k}" for k in range(4)) + ("u_corners", "u_edges")
FULL_EXTRA = ("cross", "d_corners", "e_edges")
OLL_GOAL = tuple(f"cross_corner{j}" for j in range(4)) + tuple(
    f"cross_edge{k}" for k in range(4)) + ("u_corners_oriented", "u_edges_oriented")


def _checked(state: CubieState) -> CubieState:
    state = state.normalized()
    verify(state)
    return state


# --- bounded optimal -----------------------------------------------------

def optimal_solution_bounded(state: CubieState, depth_cap: int) -> Optional[tuple]:
    """An optimal (HTM) solution if one of length <= ``depth_cap`` exists."""
    if depth_cap > MAX_OPTIMAL_CAP:
        raise ValueError(f"depth_cap must be <= {MAX_OPTIMAL_CAP}")
    state = _checked(state)
    return engine().ida(state, (), coord_flags=ALL_COORDS, max_depth=depth_cap)


def optimal_length_bounded(state: CubieState, depth_cap: int = MAX_OPTIMAL_CAP):
    """Exact distance to solved when it is at most ``depth_cap``, else AboveCap."""
    sol = optimal_solution_bounded(state, depth_cap)
    return AboveCap(depth_cap) if sol is None else len(sol)


def lower_bound(state: CubieState) -> int:
    """Admissible lower bound on the distance to solved, from every table."""
    return engine().heuristic(_checked(state), SOLVED_GOAL + FULL_EXTRA, coord_flags=ALL_COORDS)


# --- two-phase -----------------------------------------------------------

SHORT_CAP = 10
SHORT_NODES = 2_000_000


def solve_fast(state: CubieState, max_len: int = 30, time_budget: float = 0.2,
               max_nodes: int = 20_000_000) -> tuple:
    """Two-phase search; returns the first solution of at most ``max_len`` face turns.

    Phase 1 reaches <U,D,R2,L2,F2,B2> with increasing length; phase 2 finishes
    with an optimal subgroup solution. Short positions are caught first by a
    node-capped optimal search up to ``SHORT_CAP`` turns, so a cube a few
    moves from solved gets its shortest answer. Deterministic unless the
    time budget cuts the search short, which raises BudgetExceeded.
    """
    state = _checked(state)
    eng = engine()
    try:
        short = eng.ida(state, (), coord_flags=ALL_COORDS, max_depth=min(SHORT_CAP, max_len),
                        max_nodes=SHORT_NODES)
    except BudgetExceeded:
        short = None
    if short is not None:
        return short
    c = coords(state)
    ep = np.array(state.ep, np.int64)
    deadline = time.perf_counter() + time_budget
    nodes_left = max_nodes
    for p1 in range(0, max_len + 1):
        status, path, nodes = search.two_phase(
            c["twist"], c["flip"], c["slice"], c["cperm"], ep, -1, p1, max_len, nodes_left,
            *eng.two_phase_args)
        nodes_left -= nodes
        if status >= 0:
            return canonicalize(_moves_from_indices(path))
        if status == search.NODE_LIMIT or nodes_left <= 0:
            break
        if time.perf_counter() > deadline:
            break
    raise BudgetExceeded(f"no solution within {max_len} moves inside the budget")


# --- layered method ------------------------------------------------------

@dataclass(frozen=True)
class Stage:
    name: str
    predicate: str
    algorithm: tuple
    step_labels: tuple = ()

    def to_dict(self) -> dict:
        return {"name": self.name, "goal": self.predicate,
                "algorithm": format_algorithm(self.algorithm), "steps": list(self.step_labels)}


@dataclass(frozen=True)
class StagePlan:
    stages: tuple

    @property
    def algorithm(self) -> tuple:
        return canonicalize(tuple(m for st in self.stages for m in st.algorithm))

    @property
    def length(self) -> int:
        return htm_length(self.algorithm)

    def nonempty(self) -> list:
        return [st for st in self.stages if st.algorithm]

    def to_dict(self) -> dict:
        return {"stages": [st.to_dict() for st in self.stages],
                "algorithm": format_algorithm(self.algorithm), "length": self.length}


# stage-local search budgets; generous, they only guard against pathological inputs
_STAGE_NODES = 50_000_000
FINISH_CAP = MAX_OPTIMAL_CAP
FINISH_NODES = 3_000_000


def _move_index(m: Move) -> int:
    return 3 * FACES.index(m.face) + m.turns - 1


def _last_index(alg) -> int:
    return _move_index(alg[-1]) if alg else -1


def _insert_pieces(state, done_tables, candidates, fixed_tables, prev=-1):
    """Insert the remaining pieces one at a time, cheapest first."""
    eng = engine()
    algs = []
    labels = []
    remaining = list(candidates)
    while remaining:
        best = None
        for table, label in remaining:
            goal = tuple(fixed_tables) + tuple(done_tables) + (table,)
            sol = eng.ida(state, goal, max_nodes=_STAGE_NODES, prev=prev)
            if best is None or len(sol) < len(best[0]):
                best = (sol, table, label)
        sol, table, label = best
        state = apply_algorithm(state, sol)
        algs.extend(sol)
        prev = _last_index(algs)
        labels.append(label)
        done_tables = tuple(done_tables) + (table,)
        remaining = [r for r in remaining if r[0] != table]
    return tuple(algs), state, tuple(labels)


def _finish(state, cap):
    if cap <= 0:
        return None
    # the node cap keeps a failing check cheap; node counts are deterministic,
    # so the plan still depends on the state alone
    try:
        return engine().ida(state, (), coord_flags=ALL_COORDS, max_depth=cap,
                            max_nodes=FINISH_NODES)
    except BudgetExceeded:
        return None


_OLL_LOCK = threading.Lock()
_OLL: dict | None = None


def _oll_path() -> Path:
    return cache_dir() / f"oll-{TABLE_VERSION}.json"


def _oll_for_pattern(pattern: tuple, avoid: str = "") -> tuple:
    """Orientation step for a canonical pattern, memoised in memory and on disk.

    A few patterns take seconds to search, so results persist next to the
    table cache. Entries are pure functions of the pattern, so a shared or
    stale-but-same-version file can only ever hold correct answers.
    ``avoid`` names an axis (U, R or F) the first move must not turn.
    """
    global _OLL
    key = "".join(map(str, pattern)) + avoid
    with _OLL_LOCK:
        if _OLL is None:
            try:
                _OLL = json.loads(_oll_path().read_text())
            except (OSError, ValueError):
                _OLL = {}
        if key in _OLL:
            return parse_algorithm(_OLL[key])
        co = pattern[:4] + (0,) * 4
        eo = pattern[4:] + (0,) * 8
        rep = CubieState(tuple(range(8)), co, tuple(range(12)), eo)
        # the kernel's merge rule blocks a whole axis when the previous move
        # was its second face
        prev = 3 * FACES.index(_OPPOSITE[avoid]) if avoid else -1
        alg = engine().ida(rep, OLL_GOAL, coord_flags=1, max_nodes=_STAGE_NODES, prev=prev)
        _OLL[key] = format_algorithm(alg)
        try:
            path = _oll_path()
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
            tmp.write_text(json.dumps(_OLL, sort_keys=True))
            os.replace(tmp, path)
        except OSError:
            pass
        return alg


def _turn_pattern(pattern: tuple, k: int) -> tuple:
    co, eo = pattern[:4], pattern[4:]
    return tuple(co[(i + k) % 4] for i in range(4)) + tuple(eo[(i + k) % 4] for i in range(4))


def _conjugate_y(alg: tuple, j: int) -> tuple:
    y = Move("y", 1)
    return canonicalize((y,) * j + tuple(alg) + (y.inverse(),) * j)


_OPPOSITE = {"U": "D", "R": "L", "F": "B"}
_AXIS_OF = {"U": "U", "D": "U", "R": "R", "L": "R", "F": "F", "B": "F"}


def _orient_last_layer(state: CubieState, prev: Move | None = None) -> tuple:
    """Shortest orientation step for a state whose first two layers are done.

    The answer depends only on the last-layer orientation pattern (an
    algorithm that keeps the first two layers acts on last-layer twists the
    same way wherever the pieces sit), so each pattern is solved once, from
    a representative with the pieces at home. Patterns that differ by a
    quarter turn of the whole cube share one search. The first move never
    shares an axis with ``prev``, so the step cannot merge with what came before.
    """
    pattern = tuple(state.co[:4]) + tuple(state.eo[:4])
    k = min(range(4), key=lambda i: _turn_pattern(pattern, i))
    for j in ((4 - k) % 4, k):
        avoid = ""
        if prev is not None:
            # the axis in the representative's frame that lands on prev's axis
            back = _conjugate_y((Move(prev.face, 1),), (4 - j) % 4)[0]
            avoid = _AXIS_OF[back.face]
        alg = _conjugate_y(_oll_for_pattern(_turn_pattern(pattern, k), avoid), j)
        ok = not alg or prev is None or _AXIS_OF[alg[0].face] != _AXIS_OF[prev.face]
        if ok and stage_satisfied(apply_algorithm(state, alg), "last_layer_oriented"):
            return alg
    raise AssertionError("orientation step does not transfer")


def _subgroup_finish(state: CubieState, prev: int = -1) -> tuple:
    """Optimal solution inside <U,D,R2,L2,F2,B2> for a state already in that subgroup."""
    c = coords(state)
    status, path, _ = search.two_phase(c["twist"], c["flip"], c["slice"], c["cperm"],
                                       np.array(state.ep, np.int64), prev, 0, search.MAX_DEPTH - 1,
                                       _STAGE_NODES, *engine().two_phase_args)
    if status < 0:
        raise BudgetExceeded("subgroup search failed")
    return _moves_from_indices(path)


def solve_staged(state: CubieState, finish_cap: int = FINISH_CAP) -> StagePlan:
    """Deterministic five-stage layered plan (cross, corners, middle edges, OLL, PLL).

    The cross and the two last-layer stages use the shortest sequence that
    keeps earlier stages intact; corners and middle edges go in one piece at
    a time, cheapest first. Each stage's first move never merges with the
    previous stage's last, so the stages concatenate without cancellation.
    Before the first unsolved stage a node-capped
    optimal search looks for a complete solution of at most ``finish_cap``
    turns; when it finds one, that becomes the stage's algorithm and the
    later stages are empty.
    """
    state = _checked(state)
    eng = engine()
    out = []
    finished = checked = False
    played: list = []
    for name, predicate in STAGES:
        if finished or stage_satisfied(state, predicate):
            out.append(Stage(name, predicate, ()))
            continue
        labels = stage_labels(name, state)
        alg = _finish(state, finish_cap) if not checked else None
        checked = True
        if alg is not None:
            finished = True
        elif predicate == "cross":
            alg = eng.ida(state, ("cross",), max_nodes=_STAGE_NODES, prev=_last_index(played))
        elif predicate == "first_layer":
            done = tuple(f"cross_corner{j}" for j in range(4)
                         if state.cp[4 + j] == 4 + j and state.co[4 + j] == 0)
            todo = [(f"cross_corner{j}", lab) for j, lab in enumerate(labels_for_corners())
                    if f"cross_corner{j}" not in done]
            alg, _, labels = _insert_pieces(state, done, todo, ("cross",), _last_index(played))
        elif predicate == "first_two_layers":
            corners = tuple(f"cross_corner{j}" for j in range(4))
            done = tuple(f"cross_edge{k}" for k in range(4)
                         if state.ep[8 + k] == 8 + k and state.eo[8 + k] == 0)
            todo = [(f"cross_edge{k}", lab) for k, lab in enumerate(labels_for_edges())
                    if f"cross_edge{k}" not in done]
            alg, _, labels = _insert_pieces(state, done, todo, corners, _last_index(played))
        elif predicate == "last_layer_oriented":
            alg = _orient_last_layer(state, played[-1] if played else None)
        else:
            alg = _subgroup_finish(state, _last_index(played))
        state = apply_algorithm(state, alg)
        played.extend(alg)
        out.append(Stage(name, predicate, tuple(alg), tuple(labels)))
    return StagePlan(tuple(out))


def labels_for_corners():
    return ("corner_DFR", "corner_DLF", "corner_DBL", "corner_DRB")


def labels_for_edges():
    return ("edge_FR", "edge_FL", "edge_BL", "edge_BR")


# --- scrambles and tasks -------------------------------------------------

_AXIS = {"U": 0, "D": 0, "R": 1, "L": 1, "F": 2, "B": 2}


def scramble(rng_seed, length: int) -> tuple:
    """Random face turns, never the same face twice running nor three on one axis."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    out = []
    while len(out) < length:
        m = FACE_MOVES[int(rng.integers(len(FACE_MOVES)))]
        if out and out[-1].face == m.face:
            continue
        if len(out) >= 2 and _AXIS[out[-1].face] == _AXIS[m.face] == _AXIS[out[-2].face]:
            continue
        out.append(m)
    return tuple(out)


@dataclass
class Task:
    id: str
    level: str
    scramble: tuple
    start_facelets: str
    goal: str
    max_moves: int
    measured_method_length: int
    measured_optimal_length: Optional[int] = None

    def start_state(self) -> CubieState:
        from .cube import from_facelets

        return from_facelets(self.start_facelets)

    def to_dict(self) -> dict:
        d = {"id": self.id, "level": self.level, "scramble": format_algorithm(self.scramble),
             "start_facelets": self.start_facelets, "goal": self.goal,
             "max_moves": self.max_moves, "measured_method_length": self.measured_method_length}
        if self.measured_optimal_length is not None:
            d["measured_optimal_length"] = self.measured_optimal_length
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Task":
        return cls(d["id"], d["level"], parse_algorithm(d["scramble"]), d["start_facelets"],
                   d.get("goal", "solved"), int(d["max_moves"]), int(d["measured_method_length"]),
                   d.get("measured_optimal_length"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def max_moves_for(level: str) -> int:
    return 4 * BANDS[level][1]


_MEDIUM_LENGTHS = (9, 10, 11, 12)
_SIDES = "RFLB"


def _last_layer_case(rng) -> CubieState:
    """Uniformly random last layer on top of solved first two layers."""
    while True:
        cp = [int(x) for x in rng.permutation(4)]
        ep = [int(x) for x in rng.permutation(4)]
        if permutation_parity(cp) == permutation_parity(ep):
            break
    co = [int(x) for x in rng.integers(0, 3, 3)]
    eo = [int(x) for x in rng.integers(0, 2, 3)]
    co.append(-sum(co) % 3)
    eo.append(sum(eo) % 2)
    return CubieState(tuple(cp) + (4, 5, 6, 7), tuple(co) + (0,) * 4,
                      tuple(ep) + tuple(range(4, 12)), tuple(eo) + (0,) * 8)


def _high_candidate(rng) -> CubieState:
    # a random last layer, then a first-layer pair lifted out and split,
    # then one side turn that breaks the cross: every stage has work to do
    x = Move(_SIDES[int(rng.integers(4))], int(rng.choice([1, 3])))
    extra = (x, Move("U", int(rng.integers(1, 4))), x.inverse(), Move("U", int(rng.integers(1, 4))),
             Move(_SIDES[int(rng.integers(4))], int(rng.choice([1, 3]))))
    return apply_algorithm(_last_layer_case(rng), extra)


LOW_INSTRUCTIONS = tuple(m for m in BASIC_INSTRUCTIONS if not m.is_rotation)


def generate_task(rng_seed, level: str, task_id: str | None = None,
                  max_attempts: int = 500, instruction: int | None = None) -> Task:
    """Rejection-sample one task of the given difficulty band.

    low: one inverted basic instruction (optimal distance 1). medium: a
    random scramble whose optimal distance is in [9, 12] and whose layered
    solution fits the move budget. high: layered-method length in [19, 31]
    with all five stages non-empty; candidates are random last-layer cases
    with a few first-two-layer pieces knocked out, and the recorded scramble
    is the inverse of the layered solution. ``instruction`` pins a low task
    to one of the 12 face quarter turns instead of drawing it.
    """
    if level not in BANDS:
        raise ValueError(f"unknown level {level!r}")
    rng = np.random.default_rng(rng_seed)
    task_id = task_id or f"{level}-{rng_seed}"
    lo, hi = BANDS[level]
    budget = max_moves_for(level)
    for _ in range(max_attempts):
        optimal = None
        if level == "high":
            state = _high_candidate(rng)
            plan = solve_staged(state)
            if not lo <= plan.length <= hi or len(plan.nonempty()) != len(STAGES):
                continue
            scr = invert(plan.algorithm)
        else:
            if level == "low":
                pick = int(rng.integers(len(LOW_INSTRUCTIONS))) if instruction is None else instruction
                scr = (LOW_INSTRUCTIONS[pick].inverse(),)
            else:
                scr = scramble(rng, _MEDIUM_LENGTHS[int(rng.integers(len(_MEDIUM_LENGTHS)))])
            state = apply_algorithm(identity(), scr)
            optimal = optimal_length_bounded(state, MAX_OPTIMAL_CAP)
            if isinstance(optimal, AboveCap) or not lo <= optimal <= hi:
                continue
            plan = solve_staged(state)
        if plan.length > budget:
            continue
        return Task(task_id, level, tuple(scr), to_facelets(state), "solved", budget, plan.length,
                    optimal)
    raise GenerationExhausted(f"no {level} task after {max_attempts} attempts (seed {rng_seed})")
