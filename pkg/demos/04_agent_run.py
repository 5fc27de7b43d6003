"""
One agent run
=============

The outer loop asks the planner for stage subtasks and decides after each
one whether to advance, replan or stop; the inner loop plays one move at a
time. Here the planner is the noisy backend, which makes seeded mistakes.
"""

from cubeagent.agent import Agent, RunConfig, replay
from cubeagent.backends import noisy_backend, oracle_backend
from cubeagent.solver import generate_task

task = generate_task(3, "high", "high-demo")
print(f"{task.id}: layered solution {task.measured_method_length} moves, budget {task.max_moves}")

report = Agent(oracle_backend()).run(task)
print("oracle:", report.success, report.moves_used, "moves")

for seed in range(3):
    agent = Agent(noisy_backend(seed), RunConfig())
    report = agent.run(task)
    print(f"noisy seed {seed}: success={report.success} moves={report.moves_used} "
          f"replans={report.replans} reason={report.failure_reason}")
    for rec in report.steps:
        if rec.reflection:
            print("   ", rec.reflection[:110])
    assert replay(task, report)

# the trace is plain JSON and replays move by move
print(report.to_json()[:400], "...")
