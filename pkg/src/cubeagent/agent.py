"""Dual-loop planner-executor.

The outer loop asks a planner backend for a queue of stage subtasks, runs
them in order and decides after each one whether to advance, replan from
the current state or give up. The inner loop executes a single subtask one
action at a time: retrieve memories, ask the backend for a step, apply it
on the rig, observe, and record what happened.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, asdict
from typing import Optional, Protocol

from .cube import (
    ALL_MOVES, STAGE_VOCABULARY, CubeError, Move, apply_move, from_facelets, is_solved,
    stage_satisfied, to_facelets,
)
from .memory import MemoryStream
from .notation import ParseError, htm_length, parse_algorithm, qtm_length
from .rig import Rig

CONTROL = ("done", "abort")
ACTION_TOKENS = frozenset(str(m) for m in ALL_MOVES)
HISTORY = 10
STATUSES = ("pending", "active", "done", "failed")
VERDICTS = ("Advance", "Replan", "Abort")


class PlannerError(ValueError):
    """A backend's decomposition does not follow the wire schema."""


class ProtocolError(ValueError):
    """A backend's step response does not follow the wire schema."""


class BackendUnreachable(ConnectionError):
    pass


@dataclass
class Subtask:
    name: str
    goal: str
    hint: Optional[tuple] = None
    status: str = "pending"

    def __post_init__(self):
        if self.goal not in STAGE_VOCABULARY:
            raise PlannerError(f"unknown goal {self.goal!r}")

    def _move(self, old, new):
        if self.status != old:
            raise ValueError(f"subtask {self.name}: cannot go {self.status} -> {new}")
        self.status = new

    def start(self):
        self._move("pending", "active")

    def finish(self, ok: bool):
        self._move("active", "done" if ok else "failed")

    @property
    def expected_length(self) -> Optional[int]:
        return None if self.hint is None else htm_length(self.hint)

    def wire(self) -> dict:
        d = {"name": self.name, "goal": self.goal}
        if self.hint is not None:
            d["hint"] = " ".join(str(m) for m in self.hint)
        return d


@dataclass
class StepRecord:
    thought: str
    reasoning: str
    action: str
    state_after: str
    tick: int
    subtask: str = ""
    reflection: Optional[str] = None

    def to_dict(self) -> dict:
        return {"tick": self.tick, "subtask": self.subtask, "thought": self.thought,
                "reasoning": self.reasoning, "action": self.action,
                "reflection": self.reflection, "state_after": self.state_after}

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        return cls(d["thought"], d["reasoning"], d["action"], d["state_after"], d["tick"],
                   d.get("subtask", ""), d.get("reflection"))


@dataclass(frozen=True)
class RunConfig:
    enable_outer_loop: bool = True
    enable_memory: bool = True
    step_budget_factor: int = 4
    max_replans: int = 3
    repeat_state_threshold: int = 3
    retrieval_k: int = 5
    seed: int = 0
    observation: str = "full"

    def __post_init__(self):
        for name in ("step_budget_factor", "repeat_state_threshold", "retrieval_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_replans < 0:
            raise ValueError("max_replans must be non-negative")
        if self.observation not in ("full", "partial"):
            raise ValueError("observation must be full or partial")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown RunConfig fields {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class Reflection:
    verdict: str
    text: str


@dataclass
class SubtaskOutcome:
    subtask: Subtask
    done: bool
    actions: list = field(default_factory=list)
    reason: Optional[str] = None
    replans_left: int = 0
    # (facelets, actions played there) for the states a loop kept returning to
    stuck: tuple = ()

    @property
    def moves(self) -> int:
        return htm_length(parse_algorithm(" ".join(self.actions)))


@dataclass
class RunReport:
    task_id: str
    success: bool
    moves_used: int
    steps: list
    replans: int
    failure_reason: Optional[str] = None
    moves_used_qtm: int = 0

    def to_dict(self) -> dict:
        d = {"task_id": self.task_id, "success": self.success, "moves_used": self.moves_used,
             "moves_used_qtm": self.moves_used_qtm, "replans": self.replans,
             "steps": [s.to_dict() for s in self.steps]}
        if self.failure_reason is not None:
            d["failure_reason"] = self.failure_reason
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d["task_id"], d["success"], d["moves_used"],
                   [StepRecord.from_dict(s) for s in d["steps"]], d["replans"],
                   d.get("failure_reason"), d.get("moves_used_qtm", 0))

    @property
    def actions(self) -> list:
        return [s.action for s in self.steps if s.action not in CONTROL]


class PlannerBackend(Protocol):
    """Anything that answers decompose and step requests in wire form."""

    def decompose(self, request: dict) -> dict: ...

    def step(self, request: dict) -> dict: ...


# --- wire validation -------------------------------------------------------

def parse_subtasks(response) -> list:
    if not isinstance(response, dict) or not isinstance(response.get("subtasks"), list):
        raise PlannerError("decompose response needs a 'subtasks' list")
    out = []
    for i, item in enumerate(response["subtasks"]):
        if not isinstance(item, dict) or not isinstance(item.get("goal"), str):
            raise PlannerError(f"subtask {i} is not an object with a goal")
        hint = item.get("hint")
        if hint is not None:
            if not isinstance(hint, str):
                raise PlannerError(f"subtask {i}: hint must be algorithm text")
            try:
                hint = parse_algorithm(hint)
            except ParseError as exc:
                raise PlannerError(f"subtask {i}: {exc}") from None
        out.append(Subtask(str(item.get("name") or item["goal"]), item["goal"], hint))
    return out


def parse_step(response) -> dict:
    if not isinstance(response, dict):
        raise ProtocolError("step response must be a JSON object")
    action = response.get("action")
    if action not in ACTION_TOKENS and action not in CONTROL:
        raise ProtocolError(f"action {action!r} is not a move token, done or abort")
    for key in ("thought", "reasoning"):
        if not isinstance(response.get(key, ""), str):
            raise ProtocolError(f"{key} must be text")
    imp = response.get("importance")
    if imp is not None and (not isinstance(imp, int) or isinstance(imp, bool) or not 1 <= imp <= 10):
        raise ProtocolError("importance must be an integer 1-10")
    return {"thought": response.get("thought", ""), "reasoning": response.get("reasoning", ""),
            "action": action, "importance": imp}


# --- agent -------------------------------------------------------------------

class Agent:
    """One run's worth of state: backend, rig, memory stream and trace."""

    def __init__(self, backend: PlannerBackend, config: RunConfig = RunConfig()):
        self.backend = backend
        self.config = config
        self.rig: Optional[Rig] = None
        self.memory: Optional[MemoryStream] = None
        self.steps: list = []
        self.history: list = []
        self.moves_used = 0
        self.max_moves = 0
        self.task = None

    def run(self, task) -> RunReport:
        return run_outer_loop(self, task)

    # helpers used by both loops
    def facelets(self) -> str:
        return self.rig.look_around()

    def state(self):
        return from_facelets(self.facelets())

    def retrieve(self, query: str) -> list:
        if self.memory is None or not len(self.memory):
            return []
        now = self.memory.clock
        found = self.memory.retrieve(query, k=self.config.retrieval_k, now=now)
        return [{"description": m.description, "importance": m.importance,
                 "age_ticks": now - m.created_at, "kind": m.kind} for m in found]

    def remember(self, text: str, kind: str, importance: Optional[int] = None):
        if self.memory is not None:
            self.memory.record(text, kind, importance)

    def log(self, thought, reasoning, action, subtask, reflection=None) -> StepRecord:
        rec = StepRecord(thought, reasoning, action, self.facelets(), len(self.steps),
                         subtask, reflection)
        self.steps.append(rec)
        return rec


def plan_initial(backend: PlannerBackend, task, observation: str, memories=()) -> list:
    """Ask the backend for subtasks; the queue always ends with the solved goal."""
    request = {"kind": "decompose", "task_id": task.id, "facelets": observation,
               "goal": "solved", "memories": list(memories)}
    queue = parse_subtasks(backend.decompose(request))
    if not queue or queue[-1].goal != "solved":
        queue.append(Subtask("finish", "solved"))
    return queue


def _flatten(queue: list) -> list:
    """One 'solved' subtask carrying the whole plan as its hint."""
    hint = None
    if all(s.hint is not None for s in queue):
        hint = tuple(m for s in queue for m in s.hint)
    return [Subtask("solve", "solved", hint)]


def reflect(outcome: SubtaskOutcome, state=None) -> Reflection:
    st = outcome.subtask
    moves = outcome.moves
    if outcome.done:
        return Reflection("Advance", f"{st.name}: reached {st.goal} in {moves} moves, advancing.")
    text = f"{st.name}: failed to reach {st.goal} after {moves} moves ({outcome.reason})."
    for facelets, actions in outcome.stuck:
        text += f" Avoid {' '.join(actions)} at {facelets}."
    # running out of moves is final whatever the replan budget says
    if outcome.replans_left > 0 and outcome.reason != "move_budget":
        return Reflection("Replan", text + " Replanning from the current state.")
    return Reflection("Abort", text + " Giving up.")


def _step_request(agent: Agent, subtask: Subtask, facelets: str, memories: list) -> dict:
    return {"kind": "step", "subtask": subtask.wire(), "facelets": facelets,
            "history": agent.history[-HISTORY:], "memories": memories}


def _ask_step(agent: Agent, request: dict):
    """One step proposal; a schema violation is retried once, then given up on."""
    for attempt in range(2):
        try:
            return parse_step(agent.backend.step(request)), None
        except ProtocolError as exc:
            err = str(exc)
    return None, err


def run_inner_loop(agent: Agent, subtask: Subtask, replans_left: int = 0) -> SubtaskOutcome:
    cfg = agent.config
    subtask.start()
    out = SubtaskOutcome(subtask, False, replans_left=replans_left)
    start = agent.facelets()
    seen = Counter([start])
    played_at: dict = {}
    expected = subtask.expected_length
    budget = cfg.step_budget_factor * max(1, expected) if expected is not None else agent.max_moves
    steps = 0
    facelets = start
    while True:
        if stage_satisfied(from_facelets(facelets), subtask.goal):
            out.done = True
            break
        if steps >= budget:
            out.reason = "step_budget"
            break
        query = f"{subtask.goal} {subtask.name} {facelets}"
        memories = agent.retrieve(query)
        proposal, err = _ask_step(agent, _step_request(agent, subtask, facelets, memories))
        if proposal is None:
            out.reason = "protocol_error"
            agent.remember(f"{subtask.goal}: backend reply rejected twice ({err})", "observation")
            break
        action = proposal["action"]
        if action in CONTROL:
            # the goal check above already failed, so "done" is premature
            out.reason = "backend_abort" if action == "abort" else "premature_done"
            break
        cost = htm_length((Move.from_token(action),))
        if agent.moves_used + cost > agent.max_moves:
            out.reason = "move_budget"
            break
        agent.rig.execute(action)
        agent.moves_used += cost
        agent.history.append(action)
        out.actions.append(action)
        played_at.setdefault(facelets, []).append(action)
        steps += 1
        facelets = agent.facelets()
        agent.log(proposal["thought"], proposal["reasoning"], action, subtask.name)
        agent.remember(f"{subtask.goal}: played {action}, now {facelets}", "observation",
                       proposal["importance"])
        seen[facelets] += 1
        if seen[facelets] > cfg.repeat_state_threshold:
            out.reason = "deadlock"
            break
    if not out.done:
        # a loop usually alternates between two states (a half turn and its
        # repeat), so both get named
        out.stuck = tuple((f, tuple(dict.fromkeys(played_at[f])))
                          for f, n in seen.most_common(2) if n > 1 and f in played_at)
    subtask.finish(out.done)
    return out


def run_outer_loop(agent: Agent, task) -> RunReport:
    cfg = agent.config
    agent.task = task
    agent.rig = Rig(task.start_state(), cfg.observation)
    agent.memory = MemoryStream() if cfg.enable_memory else None
    agent.steps, agent.history, agent.moves_used = [], [], 0
    agent.max_moves = task.max_moves
    max_replans = cfg.max_replans if cfg.enable_outer_loop else 0
    replans = 0
    failure = None

    def decompose():
        facelets = agent.facelets()
        queue = plan_initial(agent.backend, task, facelets, agent.retrieve(f"plan solved {facelets}"))
        if not cfg.enable_outer_loop:
            queue = _flatten(queue)
        agent.remember("plan: " + ", ".join(f"{s.name} -> {s.goal}" for s in queue), "plan")
        return queue

    try:
        queue = decompose()
        while queue:
            subtask = queue.pop(0)
            outcome = run_inner_loop(agent, subtask, max_replans - replans)
            verdict = reflect(outcome, agent.state())
            agent.log(f"{subtask.name} {'complete' if outcome.done else 'stopped'}",
                      verdict.text, "done" if outcome.done else "abort", subtask.name,
                      verdict.text)
            agent.remember(verdict.text, "reflection")
            if verdict.verdict == "Advance":
                continue
            if verdict.verdict == "Replan":
                replans += 1
                queue = decompose()
                continue
            if outcome.reason == "move_budget":
                failure = "move_budget"
            elif cfg.enable_outer_loop and max_replans > 0:
                failure = "replan_exhausted"
            else:
                failure = outcome.reason
            break
    except PlannerError as exc:
        failure = "planner_error"
        agent.log("planner output rejected", str(exc), "abort", "", str(exc))
    except BackendUnreachable as exc:
        failure = "backend_unreachable"
        agent.log("planner unreachable", str(exc), "abort", "", str(exc))

    solved = is_solved(agent.state())
    success = solved and agent.moves_used <= task.max_moves and failure is None
    if failure is None and not success:
        failure = "not_solved"
    actions = parse_algorithm(" ".join(agent.history))
    return RunReport(task.id, success, agent.moves_used, agent.steps, replans,
                     None if success else failure, qtm_length(actions))


def replay(task, report: RunReport) -> bool:
    """Re-check a report: every recorded state follows from its actions, and a
    claimed success really ends solved within the task's move limit."""
    try:
        state = task.start_state()
        for rec in report.steps:
            if rec.action not in CONTROL:
                state = apply_move(state, rec.action)
            if to_facelets(state) != rec.state_after:
                return False
    except (CubeError, ValueError):
        return False
    used = htm_length(parse_algorithm(" ".join(report.actions)))
    if used != report.moves_used:
        return False
    if report.success:
        return is_solved(state) and used <= task.max_moves
    return True


_FAILURE = re.compile(r"failed to reach (\w+) ")
_AVOID = re.compile(r"Avoid (.+?) at ([URFDLB]{54})\.")


def avoided_actions(memories, goal: str, facelets: str) -> set:
    """Actions that failure reflections for ``goal`` name at ``facelets``."""
    out = set()
    for m in memories:
        if m.get("kind", "reflection") != "reflection":
            continue
        text = m.get("description", "")
        hit = _FAILURE.search(text)
        if not hit or hit.group(1) != goal:
            continue
        for avoid in _AVOID.finditer(text):
            if avoid.group(2) == facelets:
                out.update(avoid.group(1).split())
    return out
