"""Planner backends: an exact oracle, a seeded fallible one, and a wire client.

All three speak the same JSON-shaped requests the agent sends, so an
external model can stand in for either of the built-in ones.
"""

from __future__ import annotations

import hashlib
import json
import os
import shlex
import subprocess
import urllib.error
import urllib.request
from functools import lru_cache

from .agent import BackendUnreachable, ProtocolError, avoided_actions
from .cube import ALL_MOVES, FACE_MOVES, CubieState, apply_move, from_facelets, stage_satisfied
from .notation import format_algorithm, parse_algorithm, translate_to_frame
from .solver import solve_staged

ENDPOINT_ENV = "CUBEAGENT_ENDPOINT"


@lru_cache(maxsize=4096)
def _plan(state: CubieState):
    return solve_staged(state)


def _route_to(state: CubieState, goal: str) -> tuple:
    """Shortest prefix of the layered plan from ``state`` that meets ``goal``."""
    moves = _plan(state).algorithm
    cur = state
    for i, m in enumerate(moves):
        if stage_satisfied(cur, goal):
            return moves[:i]
        cur = apply_move(cur, m)
    return moves


class _Route:
    """A planned path and the (home-frame) states along it."""

    def __init__(self, start: CubieState, moves: tuple):
        self.moves = tuple(moves)
        self.index = {}
        cur = start
        for i, m in enumerate(self.moves):
            self.index.setdefault(cur, i)
            cur = apply_move(cur, m)
        self.index.setdefault(cur, len(self.moves))

    def next_move(self, state: CubieState):
        """Next planned move, or a move back towards the path within two turns."""
        i = self.index.get(state)
        if i is not None:
            return self.moves[i] if i < len(self.moves) else None, "on plan"
        best = None
        for m in FACE_MOVES:
            j = self.index.get(apply_move(state, m))
            if j is not None and (best is None or j > best[0]):
                best = (j, m)
        if best:
            return best[1], "one move off plan"
        for m in FACE_MOVES:
            s1 = apply_move(state, m)
            for m2 in FACE_MOVES:
                if m2.face == m.face:
                    continue
                j = self.index.get(apply_move(s1, m2))
                if j is not None and (best is None or j > best[0]):
                    best = (j, m)
        if best:
            return best[1], "two moves off plan"
        return None, "lost"


class OracleBackend:
    """Follows the layered solver exactly and steers back after any deviation."""

    kind = "oracle"

    def __init__(self):
        self._routes: dict = {}

    def decompose(self, request: dict) -> dict:
        state = from_facelets(request["facelets"]).normalized()
        stages = _plan(state).nonempty()
        if not stages:
            return {"subtasks": [{"name": "solved", "goal": "solved", "hint": ""}]}
        subtasks = [{"name": st.name, "goal": st.predicate,
                     "hint": format_algorithm(st.algorithm)} for st in stages]
        subtasks[-1]["goal"] = "solved"
        return {"subtasks": subtasks}

    def _proposal(self, request: dict):
        sub = request["subtask"]
        goal = sub["goal"]
        held = from_facelets(request["facelets"])
        state = held.normalized()
        if stage_satisfied(state, goal):
            return "done", f"{goal} holds", "The goal predicate is satisfied."
        key = (sub.get("name"), goal, sub.get("hint"))
        route = self._routes.get(key)
        move, how = (None, "no plan") if route is None else route.next_move(state)
        if move is None:
            hint = parse_algorithm(sub["hint"]) if sub.get("hint") else None
            cur = state
            if hint is not None:
                for m in hint:
                    cur = apply_move(cur, m)
            if hint is None or route is not None or not stage_satisfied(cur, goal):
                hint = _route_to(state, goal)
            route = self._routes[key] = _Route(state, hint)
            move, how = route.next_move(state)
        token = str(translate_to_frame((move,), held.frame)[0])
        left = len(route.moves) - route.index.get(state, 0)
        return (token, f"Working on {goal}: {how}, about {left} moves to go.",
                f"Play {token} (home-face {move}) toward {goal}.")

    def step(self, request: dict) -> dict:
        action, thought, reasoning = self._proposal(request)
        return {"thought": thought, "reasoning": reasoning, "action": action}


def _uniform(*parts) -> float:
    digest = hashlib.blake2b("|".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0 ** 64


class NoisyBackend(OracleBackend):
    """The oracle with seeded mistakes.

    With probability ``p_wrong`` a step plays a uniformly random token from
    the 27-token alphabet; with probability ``p_stall`` it repeats the
    previous move. A stall is a misreading of the cube, so it is decided by
    the seed and the observed stickers alone and recurs whenever the same
    view comes back. Wrong moves are fresh draws each visit. When retrieved
    failure reflections for the same goal name the chosen mistake at this
    exact state, the backend plays the oracle move instead.
    """

    kind = "noisy"

    def __init__(self, seed: int = 0, p_wrong: float = 0.0, p_stall: float = 0.0):
        if not (0 <= p_wrong < 1 and 0 <= p_stall < 1):
            raise ValueError("p_wrong and p_stall must lie in [0, 1)")
        super().__init__()
        self.seed, self.p_wrong, self.p_stall = seed, p_wrong, p_stall
        self._visits: dict = {}

    def step(self, request: dict) -> dict:
        action, thought, reasoning = self._proposal(request)
        if action == "done":
            return {"thought": thought, "reasoning": reasoning, "action": action}
        facelets = request["facelets"]
        visit = self._visits[facelets] = self._visits.get(facelets, 0) + 1
        history = request.get("history") or []
        choice = action
        if history and _uniform(self.seed, "stall", facelets) < self.p_stall:
            choice = history[-1]
        elif _uniform(self.seed, "wrong", facelets, visit) < self.p_wrong:
            pick = _uniform(self.seed, "pick", facelets, visit)
            choice = str(ALL_MOVES[int(pick * len(ALL_MOVES))])
        if choice != action:
            goal = request["subtask"]["goal"]
            if choice in avoided_actions(request.get("memories") or [], goal, facelets):
                reasoning += f" A past failure at this state warns against {choice}."
            else:
                action = choice
        return {"thought": thought, "reasoning": reasoning, "action": action}


class ExternalBackend:
    """Client for a planner speaking the JSON wire protocol.

    ``endpoint`` is an http(s) URL (one POST per request) or ``stdio:CMD``,
    which starts CMD once and exchanges one JSON object per line.
    """

    kind = "external"

    def __init__(self, endpoint: str | None = None, timeout: float = 30.0):
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise BackendUnreachable(f"no endpoint given and {ENDPOINT_ENV} is unset")
        self.endpoint = endpoint
        self.timeout = timeout
        self._proc = None

    def _stdio(self, payload: str) -> str:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    shlex.split(self.endpoint[len("stdio:"):]), stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE, text=True, bufsize=1)
            except OSError as exc:
                raise BackendUnreachable(str(exc)) from None
        try:
            self._proc.stdin.write(payload + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (OSError, ValueError) as exc:
            raise BackendUnreachable(str(exc)) from None
        if not line:
            raise BackendUnreachable("planner process closed its output")
        return line

    def _http(self, payload: str) -> str:
        req = urllib.request.Request(self.endpoint, data=payload.encode(), method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read().decode()
        except (urllib.error.URLError, OSError) as exc:
            raise BackendUnreachable(f"{self.endpoint}: {exc}") from None

    def _call(self, request: dict) -> dict:
        payload = json.dumps(request, sort_keys=True)
        if self.endpoint.startswith("stdio:"):
            text = self._stdio(payload)
        else:
            text = self._http(payload)
        try:
            return json.loads(text)
        except ValueError as exc:
            raise ProtocolError(f"reply is not JSON: {exc}") from None

    def decompose(self, request: dict) -> dict:
        return self._call(request)

    def step(self, request: dict) -> dict:
        return self._call(request)

    def close(self):
        if self._proc is not None:
            self._proc.terminate()
            self._proc.wait()
            self._proc = None


def oracle_backend() -> OracleBackend:
    return OracleBackend()


def noisy_backend(seed: int = 0, p_wrong: float = 0.15, p_stall: float = 0.05) -> NoisyBackend:
    return NoisyBackend(seed, p_wrong, p_stall)


def external_backend(endpoint: str | None = None) -> ExternalBackend:
    return ExternalBackend(endpoint)
