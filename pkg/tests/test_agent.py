import dataclasses
import json
import sys
import textwrap

import pytest

from cubeagent.agent import (Agent, PlannerError, ProtocolError, RunConfig, RunReport,
                             StepRecord, Subtask, SubtaskOutcome, avoided_actions, parse_step,
                             parse_subtasks, plan_initial, reflect, replay, run_inner_loop)
from cubeagent.backends import (ExternalBackend, NoisyBackend, external_backend, noisy_backend,
                                oracle_backend)
from cubeagent.agent import BackendUnreachable
from cubeagent.cube import SOLVED_FACELETS, apply_algorithm, identity, is_solved, to_facelets
from cubeagent.memory import MemoryStream
from cubeagent.notation import format_algorithm, invert, parse_algorithm
from cubeagent.rig import Rig
from cubeagent.solver import Task, generate_task, solve_staged
from cubeagent.steps import STAGES

pytestmark = pytest.mark.usefixtures("tables_ready")


@pytest.fixture(scope="module")
def tasks():
    return {lv: [generate_task(seed, lv, f"{lv}-{seed}") for seed in range(3)]
            for lv in ("low", "medium", "high")}


def _solved_task():
    return Task("solved-0", "low", (), SOLVED_FACELETS, "solved", 4, 0, 0)


def _agent_on(task, backend, **cfg):
    """An agent wired to a fresh rig, ready for a direct inner-loop call."""
    agent = Agent(backend, RunConfig(**cfg))
    agent.task = task
    agent.rig = Rig(task.start_state())
    agent.memory = MemoryStream()
    agent.max_moves = task.max_moves
    return agent


class Scripted:
    """A backend that decomposes like the oracle but always answers ``action``."""

    def __init__(self, action, subtasks=None):
        self.action = action
        self.subtasks = subtasks
        self.step_calls = 0

    def decompose(self, request):
        if self.subtasks is not None:
            return {"subtasks": self.subtasks}
        return oracle_backend().decompose(request)

    def step(self, request):
        self.step_calls += 1
        return {"thought": "t", "reasoning": "r", "action": self.action}


# -- planning ---------------------------------------------------------------

def test_plan_low_is_one_move(tasks):
    t = tasks["low"][0]
    queue = plan_initial(oracle_backend(), t, t.start_facelets)
    assert len(queue) == 1 and queue[0].goal == "solved"
    assert queue[0].hint == invert(t.scramble)


def test_plan_high_mirrors_stages(tasks):
    t = tasks["high"][0]
    queue = plan_initial(oracle_backend(), t, t.start_facelets)
    plan = solve_staged(t.start_state())
    assert [s.name for s in queue] == [name for name, _ in STAGES]
    assert [s.hint for s in queue] == [st.algorithm for st in plan.stages]
    assert queue[-1].goal == "solved"


def test_plan_solved_start_runs_in_zero_moves():
    t = _solved_task()
    queue = plan_initial(oracle_backend(), t, t.start_facelets)
    assert queue and queue[-1].goal == "solved"
    assert all(not s.hint for s in queue)
    report = Agent(oracle_backend()).run(t)
    assert report.success and report.moves_used == 0


def test_plan_appends_solved_goal():
    backend = Scripted("U", [{"name": "c", "goal": "cross"}])
    t = _solved_task()
    queue = plan_initial(backend, t, t.start_facelets)
    assert [s.goal for s in queue] == ["cross", "solved"]


@pytest.mark.parametrize("bad", [
    None, {}, {"subtasks": "cross"}, {"subtasks": [{"goal": "sideways"}]},
    {"subtasks": [{"goal": "cross", "hint": "Q"}]}, {"subtasks": [{"goal": "cross", "hint": 3}]},
])
def test_parse_subtasks_rejects(bad):
    with pytest.raises(PlannerError):
        parse_subtasks(bad)


# -- outer loop -------------------------------------------------------------

@pytest.mark.parametrize("level", ["low", "medium", "high"])
def test_oracle_solves_within_method_length(tasks, level):
    for t in tasks[level]:
        report = Agent(oracle_backend()).run(t)
        assert report.success, report.failure_reason
        assert report.moves_used <= t.measured_method_length
        assert replay(t, report)


def test_oracle_without_outer_loop(tasks):
    t = tasks["high"][1]
    report = Agent(oracle_backend(), RunConfig(enable_outer_loop=False)).run(t)
    assert report.success
    assert {s.subtask for s in report.steps} == {"solve"}


def test_every_move_recorded_once(tasks):
    t = tasks["medium"][0]
    report = Agent(noisy_backend(3)).run(t)
    state = t.start_state()
    for rec in report.steps:
        if rec.action not in ("done", "abort"):
            state = apply_algorithm(state, rec.action)
        assert to_facelets(state) == rec.state_after
    assert replay(t, report)


def test_reflection_on_every_subtask_end(tasks):
    report = Agent(oracle_backend()).run(tasks["high"][0])
    ends = [s for s in report.steps if s.action in ("done", "abort")]
    assert len(ends) == 5 and all(s.reflection for s in ends)


def test_impossible_goal_exhausts_replans(tasks):
    backend = Scripted("abort")
    report = Agent(backend).run(tasks["medium"][0])
    assert not report.success
    assert report.failure_reason == "replan_exhausted"
    assert report.replans == 3


def test_no_outer_loop_fails_with_inner_reason(tasks):
    report = Agent(Scripted("abort"), RunConfig(enable_outer_loop=False)).run(tasks["medium"][0])
    assert report.failure_reason == "backend_abort" and report.replans == 0


def test_move_budget_stops_the_run(tasks):
    t = dataclasses.replace(tasks["medium"][0], max_moves=3)
    report = Agent(oracle_backend()).run(t)
    assert not report.success and report.failure_reason == "move_budget"
    assert report.moves_used <= 3


def test_planner_error_is_reported(tasks):
    report = Agent(Scripted("U", [{"goal": "nope"}])).run(tasks["low"][0])
    assert report.failure_reason == "planner_error" and not report.success


def test_unreachable_backend_is_reported(tasks):
    backend = ExternalBackend("stdio:/nonexistent/planner")
    report = Agent(backend).run(tasks["low"][0])
    assert report.failure_reason == "backend_unreachable"


def test_external_needs_endpoint(monkeypatch):
    monkeypatch.delenv("CUBEAGENT_ENDPOINT", raising=False)
    with pytest.raises(BackendUnreachable):
        external_backend()


def test_noisy_report_byte_identical(tasks):
    t = tasks["medium"][1]
    a = Agent(noisy_backend(5)).run(t).to_json()
    b = Agent(noisy_backend(5)).run(t).to_json()
    assert a == b


def test_noisy_without_errors_is_the_oracle(tasks):
    for t in tasks["medium"] + tasks["high"][:1]:
        a = Agent(NoisyBackend(9, 0.0, 0.0)).run(t).to_json()
        b = Agent(oracle_backend()).run(t).to_json()
        assert a == b


def test_noisy_rates_validated():
    with pytest.raises(ValueError):
        NoisyBackend(0, 1.0, 0.0)
    with pytest.raises(ValueError):
        NoisyBackend(0, 0.1, -0.1)


def test_memory_disabled_keeps_no_stream(tasks):
    agent = Agent(noisy_backend(1), RunConfig(enable_memory=False))
    agent.run(tasks["medium"][0])
    assert agent.memory is None


def test_memory_records_observations_and_reflections(tasks):
    agent = Agent(oracle_backend())
    report = agent.run(tasks["medium"][0])
    kinds = [m.kind for m in agent.memory]
    assert kinds.count("observation") == len(report.actions)
    assert kinds.count("reflection") == sum(s.action in ("done", "abort") for s in report.steps)
    assert "plan" in kinds


def test_partial_observation_mode(tasks):
    t = tasks["medium"][2]
    report = Agent(oracle_backend(), RunConfig(observation="partial")).run(t)
    assert report.success and replay(t, report)


# -- inner loop -------------------------------------------------------------

def test_inner_loop_already_satisfied():
    agent = _agent_on(_solved_task(), oracle_backend())
    out = run_inner_loop(agent, Subtask("x", "cross"))
    assert out.done and out.actions == []


def test_inner_loop_follows_hint(tasks):
    t = tasks["high"][2]
    agent = _agent_on(t, oracle_backend())
    first = solve_staged(t.start_state()).stages[0]
    sub = Subtask(first.name, first.predicate, first.algorithm)
    out = run_inner_loop(agent, sub)
    assert out.done and sub.status == "done"
    assert parse_algorithm(" ".join(out.actions)) == first.algorithm


def test_always_u_deadlocks(tasks):
    agent = _agent_on(tasks["medium"][0], Scripted("U"))
    sub = Subtask("x", "solved")
    out = run_inner_loop(agent, sub)
    # back at the start after 4, 8 and 12 turns; the fourth sighting trips it
    assert out.reason == "deadlock" and len(out.actions) == 12
    assert sub.status == "failed"
    assert out.stuck and out.stuck[0][1] == ("U",)


def test_step_budget(tasks):
    agent = _agent_on(tasks["medium"][0], Scripted("R"))
    out = run_inner_loop(agent, Subtask("x", "solved", parse_algorithm("U")),)
    assert out.reason in ("step_budget", "deadlock") and len(out.actions) <= 4


def test_premature_done(tasks):
    agent = _agent_on(tasks["low"][0], Scripted("done"))
    out = run_inner_loop(agent, Subtask("x", "solved"))
    assert not out.done and out.reason == "premature_done"


def test_subtask_transitions():
    s = Subtask("x", "cross")
    s.start()
    with pytest.raises(ValueError):
        s.start()
    s.finish(True)
    assert s.status == "done"
    with pytest.raises(ValueError):
        s.finish(False)


@pytest.fixture
def bad_planner(tmp_path):
    script = tmp_path / "planner.py"
    script.write_text(textwrap.dedent(f"""
        import json, sys
        for line in sys.stdin:
            with open({str(tmp_path / 'calls')!r}, "a") as f:
                f.write(json.loads(line)["kind"] + "\\n")
            print(json.dumps({{"thought": "", "reasoning": "", "action": "Q2"}}), flush=True)
    """))
    return f"stdio:{sys.executable} {script}", tmp_path / "calls"


def test_external_bad_token_retried_once(tasks, bad_planner):
    endpoint, calls = bad_planner
    backend = ExternalBackend(endpoint)
    try:
        with pytest.raises(ProtocolError):
            parse_step(backend.step({"kind": "step"}))
        agent = _agent_on(tasks["low"][0], backend)
        out = run_inner_loop(agent, Subtask("x", "solved"))
    finally:
        backend.close()
    assert not out.done and out.reason == "protocol_error"
    assert calls.read_text().split() == ["step"] * 3


def test_external_non_json(tmp_path):
    script = tmp_path / "p.py"
    script.write_text("import sys\nfor line in sys.stdin:\n    print('hello', flush=True)\n")
    backend = ExternalBackend(f"stdio:{sys.executable} {script}")
    try:
        with pytest.raises(ProtocolError):
            backend.step({"kind": "step"})
    finally:
        backend.close()


@pytest.mark.parametrize("resp", [
    None, {"action": "Q"}, {"action": "U", "thought": 3},
    {"action": "U", "importance": 11}, {"action": "U", "importance": True},
])
def test_parse_step_rejects(resp):
    with pytest.raises(ProtocolError):
        parse_step(resp)


def test_parse_step_accepts():
    got = parse_step({"action": "x'", "importance": 7})
    assert got["action"] == "x'" and got["importance"] == 7 and got["thought"] == ""


# -- reflection ---------------------------------------------------------------

def _outcome(done, replans_left=1, reason=None, actions=("U", "R2")):
    sub = Subtask("cross", "cross")
    return SubtaskOutcome(sub, done, list(actions), reason, replans_left,
                          (("U" * 54, ("U",)),) if not done else ())


def test_reflect_verdicts():
    assert reflect(_outcome(True)).verdict == "Advance"
    first = reflect(_outcome(False, 1, "deadlock"))
    assert first.verdict == "Replan"
    assert "cross" in first.text and "2 moves" in first.text
    assert reflect(_outcome(False, 0, "deadlock")).verdict == "Abort"
    assert reflect(_outcome(False, 2, "move_budget")).verdict == "Abort"


def test_reflection_names_avoided_actions():
    text = reflect(_outcome(False, 1, "deadlock")).text
    mem = [{"description": text, "kind": "reflection"}]
    assert avoided_actions(mem, "cross", "U" * 54) == {"U"}
    assert avoided_actions(mem, "solved", "U" * 54) == set()
    assert avoided_actions(mem, "cross", "R" * 54) == set()
    assert avoided_actions([{"description": text, "kind": "observation"}], "cross", "U" * 54) == set()


def test_reflection_is_elevated_memory(tasks):
    agent = Agent(oracle_backend())
    agent.run(tasks["medium"][0])
    obs = [m.importance for m in agent.memory if m.kind == "observation"]
    refl = [m.importance for m in agent.memory if m.kind == "reflection"]
    assert min(refl) > max(obs)


# -- reports and replay -------------------------------------------------------

def test_report_round_trip(tasks):
    report = Agent(noisy_backend(2)).run(tasks["medium"][0])
    back = RunReport.from_dict(json.loads(report.to_json()))
    assert back.to_json() == report.to_json()


def test_report_omits_failure_reason_on_success(tasks):
    d = Agent(oracle_backend()).run(tasks["low"][0]).to_dict()
    assert "failure_reason" not in d


def test_replay_catches_tampering(tasks):
    t = tasks["medium"][0]
    report = Agent(oracle_backend()).run(t)
    assert replay(t, report)
    moved = next(i for i, s in enumerate(report.steps) if s.action not in ("done", "abort"))
    forged = RunReport.from_dict(report.to_dict())
    forged.steps[moved] = dataclasses.replace(forged.steps[moved], action="D")
    assert not replay(t, forged)
    short = RunReport.from_dict(report.to_dict())
    short.moves_used -= 1
    assert not replay(t, short)


def test_replay_rejects_false_success(tasks):
    t = tasks["medium"][0]
    report = Agent(Scripted("abort")).run(t)
    assert replay(t, report)
    report.success = True
    assert not replay(t, report)


def test_run_config_round_trip():
    cfg = RunConfig(enable_memory=False, seed=4)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        RunConfig(step_budget_factor=0)
