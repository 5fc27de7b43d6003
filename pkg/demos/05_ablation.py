"""
Ablations
=========

Turn off the outer loop, the memory stream, or both, and compare success
with the same noisy planner on the same seeds. A few seeds keep this quick;
the acceptance suite uses 20.
"""

import sys

from cubeagent.harness import generate_suite, run_ablations

seeds = range(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
suite = generate_suite(0)
table = run_ablations(suite, seeds)
print(table.to_text())
t = table.extra["paired_test"]
print(f"full vs vlm-only: {t['wins']} wins, {t['losses']} losses, one-sided p = {t['p_value']:.3g}")
