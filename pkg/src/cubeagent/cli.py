"""Command-line interface.

Exit codes: 0 success, 1 task failure (agent-run), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .agent import Agent, RunConfig, BackendUnreachable
from .backends import ENDPOINT_ENV
from .cube import CubeError, apply_algorithm, from_facelets, identity, render_net, to_facelets
from .notation import ParseError, format_algorithm, parse_algorithm
from .rig import compile_script, script_to_jsonl
from .solver import BudgetExceeded, Task, scramble, solve_fast, solve_staged


class UsageError(Exception):
    pass


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _load_task(path, task_id=None) -> Task:
    data = _read_json(path)
    if "tasks" in data:
        tasks = [Task.from_dict(t) for t in data["tasks"]]
        if task_id is None:
            if len(tasks) != 1:
                raise UsageError("suite file holds several tasks; pick one with --id")
            return tasks[0]
        for t in tasks:
            if t.id == task_id:
                return t
        raise UsageError(f"no task {task_id!r} in {path}")
    try:
        return Task.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path} is not a task file: {exc}") from None


def _load_suite(path) -> harness.TaskSuite:
    try:
        return harness.TaskSuite.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path} is not a suite file: {exc}") from None


def cmd_gen_suite(a):
    counts = None
    if a.counts:
        counts = dict(zip(("low", "medium", "high"), a.counts))
    suite = harness.generate_suite(a.seed, counts)
    _write(a.out, suite.to_json())
    if a.out not in (None, "-"):
        n = {lv: len(suite.by_level(lv)) for lv in ("low", "medium", "high")}
        print(f"wrote {len(suite.tasks)} tasks {n} to {a.out}")
    return 0


def cmd_scramble(a):
    if a.len < 0:
        raise UsageError("--len must be non-negative")
    alg = scramble(a.seed, a.len)
    print(format_algorithm(alg))
    if a.facelets:
        print(to_facelets(apply_algorithm(identity(), alg)))
    return 0


def cmd_solve(a):
    state = from_facelets(a.facelets)
    if a.method == "fast":
        alg = solve_fast(state)
    else:
        alg = solve_staged(state).algorithm
    text = format_algorithm(alg)
    if text:
        print(text)
    return 0


def _backend_config(a) -> dict:
    if a.backend == "noisy":
        return {"kind": "noisy", "p_wrong": a.p_wrong, "p_stall": a.p_stall}
    if a.backend == "external":
        return {"kind": "external", "endpoint": a.endpoint}
    return {"kind": "oracle"}


def cmd_agent_run(a):
    task = _load_task(a.task, a.id)
    cfg = RunConfig(enable_outer_loop=not a.no_outer_loop, enable_memory=not a.no_memory,
                    seed=a.seed, observation=a.observation)
    backend = harness.make_backend(_backend_config(a), a.seed)
    try:
        report = Agent(backend, cfg).run(task)
    finally:
        if hasattr(backend, "close"):
            backend.close()
    if a.report:
        _write(a.report, report.to_json())
    status = "solved" if report.success else f"failed ({report.failure_reason})"
    print(f"{task.id}: {status} in {report.moves_used} moves, {report.replans} replans",
          file=sys.stderr if a.report in (None, "-") else sys.stdout)
    return 0 if report.success else 1


def _run_config(path) -> tuple:
    if path is None:
        return {"kind": "oracle"}, RunConfig()
    data = dict(_read_json(path))
    backend = data.pop("backend", {"kind": "oracle"})
    try:
        return backend, RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_bench(a):
    suite = _load_suite(a.suite)
    backend, cfg = _run_config(a.config)
    table = harness.evaluate(suite, backend, cfg, range(a.seeds))
    if a.out:
        _write(a.out, table.to_json())
    sys.stdout.write(table.to_text())
    return 0


def cmd_ablate(a):
    suite = _load_suite(a.suite)
    table = harness.run_ablations(suite, range(a.seeds))
    if a.out:
        _write(a.out, table.to_json())
    sys.stdout.write(table.to_text())
    test = table.extra.get("paired_test")
    if test:
        print(f"full vs vlm-only: {test['wins']} wins, {test['losses']} losses, "
              f"one-sided p = {test['p_value']:.4g}")
    return 0


def cmd_render(a):
    sys.stdout.write(render_net(a.facelets))
    return 0


def cmd_compile_script(a):
    sys.stdout.write(script_to_jsonl(compile_script(parse_algorithm(a.alg))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cubeagent", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("gen-suite", help="generate the 15/18/10 task suite")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--counts", type=int, nargs=3, metavar=("LOW", "MEDIUM", "HIGH"))
    s.set_defaults(func=cmd_gen_suite)

    s = sub.add_parser("scramble", help="print a random scramble")
    s.add_argument("--len", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--facelets", action="store_true", help="also print the scrambled facelets")
    s.set_defaults(func=cmd_scramble)

    s = sub.add_parser("solve", help="solve a facelet string")
    s.add_argument("--facelets", required=True)
    s.add_argument("--method", choices=("staged", "fast"), default="staged")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("agent-run", help="run the agent on one task")
    s.add_argument("--task", required=True, help="task JSON, or a suite JSON with --id")
    s.add_argument("--id", help="task id inside a suite file")
    s.add_argument("--backend", choices=("oracle", "noisy", "external"), default="oracle")
    s.add_argument("--endpoint", help=f"external planner URL or stdio:CMD (default ${ENDPOINT_ENV})")
    s.add_argument("--no-outer-loop", action="store_true")
    s.add_argument("--no-memory", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--p-wrong", type=float, default=0.15)
    s.add_argument("--p-stall", type=float, default=0.05)
    s.add_argument("--observation", choices=("full", "partial"), default="full")
    s.add_argument("--report")
    s.set_defaults(func=cmd_agent_run)

    s = sub.add_parser("bench", help="evaluate one configuration over a suite")
    s.add_argument("--suite", required=True)
    s.add_argument("--config", help='JSON with RunConfig fields and an optional "backend" object')
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("ablate", help="run the four ablation configurations")
    s.add_argument("--suite", required=True)
    s.add_argument("--seeds", type=int, default=20)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("render", help="draw a facelet string as a net")
    s.add_argument("--facelets", required=True)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("compile-script", help="robot primitives for an algorithm, as JSONL")
    s.add_argument("--alg", required=True)
    s.set_defaults(func=cmd_compile_script)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except (UsageError, CubeError, ParseError, BudgetExceeded, BackendUnreachable,
            OSError, ValueError) as exc:
        print(f"cubeagent {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
