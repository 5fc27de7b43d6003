"""Task suites, evaluation runs, ablations and results tables."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .agent import Agent, RunConfig, RunReport, replay
from .backends import external_backend, noisy_backend, oracle_backend
from .solver import LEVELS, LOW_INSTRUCTIONS, Task, generate_task

DEFAULT_COUNTS = {"low": 15, "medium": 18, "high": 10}

ABLATIONS = {
    "full": RunConfig(),
    "-dual-loop": RunConfig(enable_outer_loop=False),
    "-memory": RunConfig(enable_memory=False),
    "vlm-only": RunConfig(enable_outer_loop=False, enable_memory=False),
}
NOISE = {"kind": "noisy", "p_wrong": 0.15, "p_stall": 0.05}


@dataclass
class TaskSuite:
    seed: int
    tasks: list
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))

    def by_level(self, level: str) -> list:
        return [t for t in self.tasks if t.level == level]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "counts": {lv: self.counts.get(lv, 0) for lv in LEVELS},
                "tasks": [t.to_dict() for t in self.tasks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSuite":
        return cls(d["seed"], [Task.from_dict(t) for t in d["tasks"]], dict(d["counts"]))

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "TaskSuite":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_suite(seed: int, counts: dict | None = None) -> TaskSuite:
    """15 low, 18 medium and 10 high tasks by default; each task has its own seed stream.

    There are only 12 distinct low tasks (one face quarter turn), so low
    tasks walk through a seeded shuffle of all 12 before any repeats.
    """
    counts = dict(DEFAULT_COUNTS if counts is None else counts)
    if any(n < 0 for n in counts.values()) or set(counts) - set(LEVELS):
        raise ValueError(f"counts must map {LEVELS} to non-negative integers")
    tasks = []
    n_low = len(LOW_INSTRUCTIONS)
    for li, level in enumerate(LEVELS):
        for i in range(counts.get(level, 0)):
            rng = np.random.default_rng([seed, li, i])
            pin = None
            if level == "low":
                order = np.random.default_rng([seed, li, i // n_low, 1]).permutation(n_low)
                pin = int(order[i % n_low])
            tasks.append(generate_task(rng, level, f"{level}-{i:02d}", instruction=pin))
    return TaskSuite(seed, tasks, counts)


def make_backend(config: dict, seed: int):
    kind = config.get("kind", "oracle")
    if kind == "oracle":
        return oracle_backend()
    if kind == "noisy":
        return noisy_backend(seed, config.get("p_wrong", 0.15), config.get("p_stall", 0.05))
    if kind == "external":
        return external_backend(config.get("endpoint"))
    raise ValueError(f"unknown backend kind {kind!r}")


def run_task(task: Task, backend_config: dict, run_config: RunConfig, seed: int) -> RunReport:
    cfg = RunConfig.from_dict({**run_config.to_dict(), "seed": seed})
    backend = make_backend(backend_config, seed)
    try:
        return Agent(backend, cfg).run(task)
    finally:
        close = getattr(backend, "close", None)
        if close:
            close()


def config_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class Row:
    name: str
    config_hash: str
    successes: dict
    totals: dict
    details: list

    def accuracy(self, level: str):
        n = self.totals.get(level, 0)
        return round(100.0 * self.successes.get(level, 0) / n, 2) if n else None

    def aggregate(self, levels=("medium", "high")) -> float:
        n = sum(self.totals.get(lv, 0) for lv in levels)
        return 100.0 * sum(self.successes.get(lv, 0) for lv in levels) / n if n else 0.0

    def outcomes(self, levels=LEVELS) -> dict:
        """(task id, seed) -> success, for paired comparisons."""
        return {(d["task_id"], d["seed"]): d["success"] for d in self.details
                if d["level"] in levels}

    def to_dict(self) -> dict:
        return {"name": self.name, "config_hash": self.config_hash,
                "accuracy": {lv: _fmt(self.accuracy(lv)) for lv in LEVELS},
                "successes": {lv: self.successes.get(lv, 0) for lv in LEVELS},
                "totals": {lv: self.totals.get(lv, 0) for lv in LEVELS},
                "details": self.details}


def _fmt(x):
    return None if x is None else f"{x:.2f}"


@dataclass
class ResultsTable:
    rows: list
    seeds: list
    extra: dict = field(default_factory=dict)

    def row(self, name: str) -> Row:
        return next(r for r in self.rows if r.name == name)

    def to_dict(self) -> dict:
        d = {"seeds": list(self.seeds), "rows": [r.to_dict() for r in self.rows]}
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        if not self.rows:
            return "(no tasks)\n"
        width = max(len("config"), *(len(r.name) for r in self.rows))
        lines = [f"{'config':<{width}}  " + "  ".join(f"{lv:>8}" for lv in LEVELS)]
        for r in self.rows:
            cells = [_fmt(r.accuracy(lv)) for lv in LEVELS]
            lines.append(f"{r.name:<{width}}  " + "  ".join(
                f"{(c + '%') if c else '-':>8}" for c in cells))
        return "\n".join(lines) + "\n"


def _evaluate_row(name, suite, backend_config, run_config, seeds) -> Row:
    successes = {lv: 0 for lv in LEVELS}
    totals = {lv: 0 for lv in LEVELS}
    details = []
    for seed in seeds:
        for task in suite.tasks:
            report = run_task(task, backend_config, run_config, seed)
            # a success only counts once the trace replays to solved in budget
            ok = report.success and replay(task, report)
            totals[task.level] += 1
            successes[task.level] += ok
            d = {"task_id": task.id, "level": task.level, "seed": seed, "success": ok,
                 "moves_used": report.moves_used, "replans": report.replans}
            if not ok:
                d["failure_reason"] = report.failure_reason or "replay_mismatch"
            details.append(d)
    details.sort(key=lambda d: (d["task_id"], d["seed"]))
    h = config_hash(backend_config, {**run_config.to_dict(), "seed": None}, list(seeds))
    return Row(name, h, successes, totals, details)


def evaluate(suite: TaskSuite, backend_config: dict, run_config: RunConfig = RunConfig(),
             seeds=(0,), name: str | None = None) -> ResultsTable:
    """Run every task once per seed and tabulate per-level accuracy."""
    seeds = list(seeds)
    if not suite.tasks:
        return ResultsTable([], seeds)
    name = name or backend_config.get("kind", "oracle")
    return ResultsTable([_evaluate_row(name, suite, backend_config, run_config, seeds)], seeds)


def paired_test(better: Row, worse: Row, levels=("medium", "high")) -> dict:
    """Exact one-sided sign test (McNemar) on runs paired by task and seed."""
    a, b = better.outcomes(levels), worse.outcomes(levels)
    wins = sum(1 for k in a if a[k] and not b.get(k, False))
    losses = sum(1 for k in a if b.get(k, False) and not a[k])
    n = wins + losses
    p = binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
    return {"better": better.name, "worse": worse.name, "wins": wins, "losses": losses,
            "p_value": round(float(p), 6)}


def run_ablations(suite: TaskSuite, seeds, noise: dict | None = None) -> ResultsTable:
    """The four ablation rows with the noisy backend, all on the same seeds."""
    seeds = list(seeds)
    noise = dict(NOISE if noise is None else noise)
    if not suite.tasks:
        return ResultsTable([], seeds)
    rows = [_evaluate_row(name, suite, noise, cfg, seeds) for name, cfg in ABLATIONS.items()]
    table = ResultsTable(rows, seeds)
    table.extra["paired_test"] = paired_test(table.row("full"), table.row("vlm-only"))
    return table
