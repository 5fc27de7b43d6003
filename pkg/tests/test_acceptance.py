"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (also repeated in the
terminal summary) with its measured runtime. Thresholds are the contract
values; nothing here is tuned to the results.

The suite is regenerated from seed 0 with a cold table cache, and the
ablation runs on seeds 0-19.
"""

import os
import statistics
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE
from cubeagent.agent import CONTROL, RunConfig
from cubeagent.cube import (ALL_MOVES, apply_algorithm, apply_move, from_facelets,
                            identity, is_solved, permutation_parity, random_state, to_facelets)
from cubeagent.harness import DEFAULT_COUNTS, TaskSuite, evaluate, run_ablations, run_task
from cubeagent.memory import MemoryObject, MemoryStream, load, persist
from cubeagent.notation import canonicalize, format_algorithm, htm_length, parse_algorithm
from cubeagent.rig import compile_script, simulate
from cubeagent.solver import (engine, lower_bound, optimal_length_bounded, scramble, solve_fast,
                              solve_staged)

pytestmark = pytest.mark.acceptance

SUITE_SEED = 0
ABLATION_SEEDS = range(20)
NOISE = {"kind": "noisy", "p_wrong": 0.15, "p_stall": 0.05}


@contextmanager
def criterion(name, limit=None):
    """Run a block as one criterion and report PASS or FAIL with its runtime."""
    t0 = time.perf_counter()
    notes = []
    try:
        yield notes
        took = time.perf_counter() - t0
        if limit is not None:
            assert took < limit, f"took {took:.1f}s, limit {limit}s"
    except BaseException as exc:
        took = time.perf_counter() - t0
        reason = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        _report(f"FAIL  {name} ({took:.1f}s{''.join(', ' + n for n in notes)}): {reason}")
        raise
    _report(f"PASS  {name} ({took:.1f}s{''.join(', ' + n for n in notes)})")


def _report(line):
    ACCEPTANCE.append(line)
    print(line)


def _rng(tag):
    return np.random.default_rng([SUITE_SEED, tag])


# -- shared fixtures ------------------------------------------------------------

@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    """Run `gen-suite` in a fresh process with an empty table cache."""
    tmp = tmp_path_factory.mktemp("acceptance")
    out = tmp / "suite.json"
    env = dict(os.environ, CUBEAGENT_CACHE=str(tmp / "cache"))
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "cubeagent", "gen-suite", "--seed",
                           str(SUITE_SEED), "--out", str(out)],
                          env=env, capture_output=True, text=True)
    took = time.perf_counter() - t0
    return proc, out, took


@pytest.fixture(scope="module")
def suite(generated):
    proc, out, _ = generated
    assert proc.returncode == 0, proc.stderr
    return TaskSuite.load(out)


# -- criteria ---------------------------------------------------------------------

def test_suite_regeneration(generated, tables_ready):
    with criterion("suite regeneration: 15/18/10 tasks in bands, < 5 min with cold tables") as notes:
        proc, out, took = generated
        notes.append(f"gen-suite {took:.1f}s")
        assert proc.returncode == 0, proc.stderr
        s = TaskSuite.load(out)
        counts = {lv: len(s.by_level(lv)) for lv in DEFAULT_COUNTS}
        assert counts == {"low": 15, "medium": 18, "high": 10}, counts
        for t in s.tasks:
            start = apply_algorithm(identity(), t.scramble)
            assert to_facelets(start) == t.start_facelets, t.id
            if t.level == "low":
                assert len(t.scramble) == 1 and optimal_length_bounded(start, 1) == 1, t.id
            elif t.level == "medium":
                assert 9 <= optimal_length_bounded(start, 12) <= 12, t.id
            else:
                assert 19 <= solve_staged(start).length <= 31, t.id
        assert took < 300, f"gen-suite took {took:.1f}s"


def test_oracle_completeness(suite, tables_ready):
    with criterion("oracle completeness: 100% on all levels", limit=120):
        table = evaluate(suite, {"kind": "oracle"}, RunConfig(), seeds=[0])
        row = table.rows[0]
        acc = {lv: row.accuracy(lv) for lv in DEFAULT_COUNTS}
        assert acc == {"low": 100.0, "medium": 100.0, "high": 100.0}, acc


def test_ablation_shape(suite, tables_ready):
    with criterion("ablation shape: ordering, paired test, low >= 95%", limit=600) as notes:
        table = run_ablations(suite, ABLATION_SEEDS, NOISE)
        print(table.to_text(), end="")
        notes.append("low-level " + " ".join(f"{r.name} {r.accuracy('low'):.2f}%" for r in table.rows))
        agg = {r.name: r.aggregate(("medium", "high")) for r in table.rows}
        assert agg["full"] >= agg["-dual-loop"], agg
        assert agg["full"] >= agg["-memory"] >= agg["vlm-only"], agg
        test = table.extra["paired_test"]
        assert (test["better"], test["worse"]) == ("full", "vlm-only")
        assert test["p_value"] < 0.05, test
        assert agg["full"] > agg["vlm-only"], agg
        low = {r.name: r.accuracy("low") for r in table.rows}
        assert all(v >= 95.0 for v in low.values()), f"low-level accuracy {low}"


def test_solver_soundness(tables_ready):
    with criterion("solver soundness: 1000 scrambles, fast mean < 100 ms, admissible on 10k") as notes:
        engine()
        rng = _rng(4)
        states = [apply_algorithm(identity(), scramble(rng, 25)) for _ in range(1000)]
        times, fast_len = [], {}
        for s in states:
            t0 = time.perf_counter()
            alg = solve_fast(s, max_len=30)
            times.append(time.perf_counter() - t0)
            assert is_solved(apply_algorithm(s, alg)) and htm_length(alg) <= 30
            fast_len[s] = htm_length(alg)
        mean_ms = 1000 * statistics.mean(times)
        notes.append(f"fast mean {mean_ms:.1f} ms")
        assert mean_ms < 100, f"fast solver mean {mean_ms:.1f} ms"
        for s in states:
            assert is_solved(apply_algorithm(s, solve_staged(s).algorithm))
        # admissibility: the 1000 above, 4500 uniform random states and 4500
        # short scrambles (where solve_fast returns the exact distance)
        extra = [random_state(rng) for _ in range(4500)]
        extra += [apply_algorithm(identity(), scramble(rng, int(rng.integers(1, 11))))
                  for _ in range(4500)]
        for s in extra:
            fast_len[s] = htm_length(solve_fast(s, max_len=30))
        checked = states + extra
        assert len(checked) == 10_000
        bad = [s for s in checked if lower_bound(s) > fast_len[s]]
        assert not bad, f"{len(bad)} states with bound above a real solution"


def test_group_and_parser_properties():
    with criterion("group/parser properties: orders, conservation, 10k round-trips, canonicalize"):
        for text, order in (("U", 4), ("U2", 2), ("R U R' U'", 6), ("R U R' U R U2 R'", 6)):
            alg = parse_algorithm(text)
            s, n = apply_algorithm(identity(), alg), 1
            while s != identity():
                s, n = apply_algorithm(s, alg), n + 1
            assert n == order, (text, n)
        rng = _rng(5)
        for _ in range(200):
            s = random_state(rng)
            for m in ALL_MOVES:
                t = apply_move(s, m)
                assert sum(t.co) % 3 == 0 and sum(t.eo) % 2 == 0
                assert permutation_parity(t.cp) == permutation_parity(t.ep)
        for _ in range(10_000):
            alg = tuple(ALL_MOVES[i] for i in rng.integers(len(ALL_MOVES), size=rng.integers(0, 25)))
            assert parse_algorithm(format_algorithm(alg)) == alg
            c = canonicalize(alg)
            assert canonicalize(c) == c
            assert apply_algorithm(identity(), c).normalized() == \
                apply_algorithm(identity(), alg).normalized()
        for _ in range(10_000):
            s = random_state(rng)
            assert from_facelets(to_facelets(s)) == s
        stream = MemoryStream()
        for i in range(10_000):
            stream.record(f"move {i} {rng.integers(1000)}", ("observation", "reflection", "plan")[i % 3],
                          int(rng.integers(1, 11)))
        path = os.path.join(os.environ.get("TMPDIR", "/tmp"), f"acceptance-{os.getpid()}.jsonl")
        try:
            persist(stream, path)
            assert load(path) == stream
        finally:
            os.remove(path)


def _unit(cos):
    v = np.zeros(256)
    v[0], v[1] = cos, np.sqrt(1 - cos * cos)
    return tuple(v)


def _stream(specs, now):
    query = tuple(np.eye(256)[0])
    s = MemoryStream(lambda text: query if text == "query" else _unit(0.0))
    for i, (ago, imp, cos, created) in enumerate(specs):
        s.add(MemoryObject(f"m{i}", f"memory {i}", "observation", created, now - ago, imp, _unit(cos)))
    return s


def test_memory_fixtures():
    with criterion("memory fixtures: dominance, recency, access side-effect, determinism, 3-memory"):
        s = _stream([(10, 3, 0.1, 0), (0, 9, 0.95, 1), (5, 5, 0.5, 2)], now=50)
        assert s.retrieve("query", k=1, now=50)[0].id == "m1"
        s = _stream([(30, 5, 0.5, 0), (10, 5, 0.5, 0)], now=40)
        assert [m.id for m in s.retrieve("query", k=2, now=40)] == ["m1", "m0"]
        s = _stream([(40, 2, 0.3, 0), (20, 4, 0.6, 1), (30, 7, 0.1, 2), (10, 1, 0.9, 3)], now=60)
        before = {m.id: m.last_accessed_at for m in s}
        got = {m.id for m in s.retrieve("query", k=2, now=60)}
        for m in s:
            assert m.last_accessed_at == (60 if m.id in got else before[m.id])
        a = _stream([(5, 5, 0.5, 0), (5, 5, 0.5, 1), (9, 2, 0.7, 2)], now=20)
        b = _stream([(5, 5, 0.5, 0), (5, 5, 0.5, 1), (9, 2, 0.7, 2)], now=20)
        assert [m.id for m in a.retrieve("query", 3, 20)] == [m.id for m in b.retrieve("query", 3, 20)]
        # (ticks since access, importance, cosine) = (0,5,0.2), (50,9,0.2), (50,5,0.9):
        # each normalised component is 1 for exactly one memory, so all totals
        # are 1 and the newest creation wins the tie
        s = _stream([(0, 5, 0.2, 10), (50, 9, 0.2, 20), (50, 5, 0.9, 30)], now=100)
        scored = s.score("query", now=100)
        assert [round(x.score, 9) for x in scored] == [1.0, 1.0, 1.0]
        assert [m.id for m in s.retrieve("query", k=3, now=100)] == ["m2", "m1", "m0"]


def _replays(task, report) -> bool:
    state = from_facelets(task.start_facelets)
    for rec in report.steps:
        if rec.action not in CONTROL:
            state = apply_algorithm(state, rec.action)
        if to_facelets(state) != rec.state_after:
            return False
    return is_solved(state) and htm_length(parse_algorithm(" ".join(report.actions))) <= task.max_moves


def test_trace_replay(suite, tables_ready):
    with criterion("trace replay: every success replays; simulate(compile(a)) == apply(a) x1000") as notes:
        successes = 0
        for backend, cfg, seeds in (({"kind": "oracle"}, RunConfig(), [0]),
                                    (NOISE, RunConfig(), [0, 1]),
                                    (NOISE, RunConfig(enable_outer_loop=False,
                                                      enable_memory=False), [0, 1])):
            counted = evaluate(suite, backend, cfg, seeds).rows[0]
            replayed = 0
            for seed in seeds:
                for task in suite.tasks:
                    report = run_task(task, backend, cfg, seed)
                    if report.success:
                        assert _replays(task, report), (task.id, seed)
                        replayed += 1
            assert replayed == sum(counted.successes.values())
            successes += replayed
        notes.append(f"{successes} successes replayed")
        rng = _rng(7)
        for _ in range(1000):
            start = random_state(rng)
            alg = tuple(ALL_MOVES[i] for i in rng.integers(len(ALL_MOVES), size=rng.integers(0, 30)))
            assert simulate(compile_script(alg), start) == apply_algorithm(start, alg)
