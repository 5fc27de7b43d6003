import numpy as np
import pytest

from cubeagent.cube import ALL_MOVES, FACES, apply_algorithm, identity, random_state, to_facelets
from cubeagent.notation import format_algorithm
from cubeagent.rig import (
    GRIP, HIDDEN, RELEASE, REORIENT, ROTATE, ConflictError, Incomplete, Primitive, Rig, ScriptError,
    compile_script, observe, reconstruct, script_from_jsonl, script_to_jsonl, simulate,
)


def test_compile_examples():
    assert compile_script("") == []
    assert compile_script("U") == [GRIP("U"), ROTATE("U", 1), RELEASE("U")]
    assert compile_script("x'") == [REORIENT("x", 3)]


def test_simulate_examples():
    s = random_state(np.random.default_rng(0))
    assert simulate([], s) == s
    assert simulate([GRIP("U"), ROTATE("U", 2), RELEASE("U")], s) == apply_algorithm(s, "U2")


@pytest.mark.parametrize("script", [
    [ROTATE("U", 1)],
    [GRIP("U"), ROTATE("R", 1), RELEASE("U")],
    [GRIP("U"), ROTATE("U", 1)],
    [RELEASE("U")],
    [GRIP("U"), GRIP("U")],
    [GRIP("U"), REORIENT("x", 1), RELEASE("U")],
])
def test_bad_scripts(script):
    with pytest.raises(ScriptError):
        simulate(script, identity())


def test_bad_primitives():
    with pytest.raises(ScriptError):
        Primitive("SPIN", "U")
    with pytest.raises(ScriptError):
        ROTATE("U", 4)
    with pytest.raises(ScriptError):
        REORIENT("U", 1)


def _bracketed(script):
    held = set()
    for p in script:
        if p.op == "GRIP":
            held.add(p.face)
        elif p.op == "RELEASE":
            held.discard(p.face)
        elif p.op == "ROTATE" and p.face not in held:
            return False
    return not held


def test_compile_simulate_matches_apply_1000():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        alg = tuple(ALL_MOVES[i] for i in rng.integers(0, 27, 30))
        s = random_state(rng)
        script = compile_script(alg)
        assert _bracketed(script)
        assert simulate(script, s) == apply_algorithm(s, alg)


def test_jsonl_round_trip():
    script = compile_script("R U R' U' x2 F")
    text = script_to_jsonl(script)
    assert text.splitlines()[1] == '{"op": "ROTATE", "face": "R", "q": 1}'
    assert script_from_jsonl(text) == script
    with pytest.raises(ScriptError):
        script_from_jsonl('{"op": "ROTATE", "face": "Q", "q": 1}\n')


def test_observe_full_and_partial():
    s = random_state(np.random.default_rng(2))
    assert observe(s, "full").stickers == to_facelets(s)
    part = observe(s, "partial", "URF")
    assert sorted(part.faces()) == sorted("URF")
    assert part.visible_count == 27
    truth = to_facelets(s)
    assert all(c == HIDDEN or c == truth[i] for i, c in enumerate(part.stickers))
    with pytest.raises(ValueError):
        observe(s, "partial", "UDF")


def test_reconstruct():
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = random_state(rng)
        assert reconstruct([observe(s, "partial", "URF"), observe(s, "partial", "DBL")]) == to_facelets(s)
        assert reconstruct([observe(s, "partial", v) for v in ("URF", "UFL", "DRB", "DLF", "ULB")]) \
            == to_facelets(s)
    s = random_state(rng)
    assert reconstruct([observe(s, "partial", "URF")]) == Incomplete(27)
    other = apply_algorithm(s, "U")
    with pytest.raises(ConflictError):
        reconstruct([observe(s, "partial", "URF"), observe(other, "partial", "URF")])


def test_opposite_corners_cover_every_face():
    for v in ("URF", "UFL", "ULB", "UBR"):
        opposite = {"URF": "DBL", "UFL": "DRB", "ULB": "DFR", "UBR": "DLF"}[v]
        assert sorted(v + opposite) == sorted(FACES)


def test_rig_partial_mode():
    rig = Rig(identity(), "partial")
    rig.execute("R U R'")
    assert rig.look_around() == to_facelets(apply_algorithm(identity(), "R U R'"))
    assert rig.current() == apply_algorithm(identity(), "R U R'")
    assert rig.observe("URF").visible_count == 27
    assert len(rig.scripts) == 1 and len(rig.scripts[0]) == 9
