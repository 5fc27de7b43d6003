"""
Three solvers
=============

``optimal_length_bounded`` proves distances up to 12 turns with IDA* over
pattern databases, ``solve_fast`` is a two-phase search for any state, and
``solve_staged`` solves the way a person would, stage by stage.
"""

import time

from cubeagent import apply_algorithm, format_algorithm, identity, is_solved
from cubeagent.solver import (lower_bound, optimal_length_bounded, scramble, solve_fast,
                              solve_staged)

# the first call loads (or builds) the tables
t0 = time.perf_counter()
print("optimal length of R U R' U':", optimal_length_bounded(apply_algorithm(identity(), "R U R' U'")))
print(f"tables ready in {time.perf_counter() - t0:.1f}s")

scr = scramble(42, 25)
state = apply_algorithm(identity(), scr)
print("scramble:", format_algorithm(scr))
print("lower bound from the tables:", lower_bound(state))

t0 = time.perf_counter()
fast = solve_fast(state)
print(f"two-phase ({len(fast)} moves, {1000 * (time.perf_counter() - t0):.0f} ms):",
      format_algorithm(fast))
assert is_solved(apply_algorithm(state, fast))

plan = solve_staged(state)
print(f"layered method, {plan.length} moves:")
for st in plan.stages:
    print(f"  {st.name:24} {', '.join(st.step_labels):40} {format_algorithm(st.algorithm)}")
assert is_solved(apply_algorithm(state, plan.algorithm))
