"""
The cube engine and move notation
=================================

States are cubies (which piece sits in which slot, and how it is twisted);
the 54-sticker facelet string is only a serialization.
"""

from cubeagent import apply_algorithm, canonicalize, format_algorithm, identity, parse_algorithm
from cubeagent.cube import from_facelets, render_net, to_facelets

# a solved cube, then the "sexy move" applied once
alg = parse_algorithm("R U R' U'")
state = apply_algorithm(identity(), alg)
print(render_net(to_facelets(state)))

# the facelet string round-trips back to the same cubie state
assert from_facelets(to_facelets(state)) == state

# R U R' U' has order 6
s, n = state, 1
while s != identity():
    s, n = apply_algorithm(s, alg), n + 1
print("order of", format_algorithm(alg), "=", n)

# canonicalize merges turns and removes whole-cube rotations
for text in ("U U", "R R'", "x U x'", "R U2 U2 L"):
    print(f"{text!r:12} -> {format_algorithm(canonicalize(parse_algorithm(text)))!r}")

# an unreachable sticker pattern is rejected: twist a single corner
stickers = list(to_facelets(identity()))
stickers[8], stickers[9], stickers[20] = stickers[9], stickers[20], stickers[8]
try:
    from_facelets("".join(stickers))
except ValueError as exc:
    print("rejected:", exc)
