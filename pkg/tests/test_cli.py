import json

import pytest

from cubeagent.cli import main
from cubeagent.cube import SOLVED_FACELETS, apply_algorithm, identity, is_solved, to_facelets
from cubeagent.harness import generate_suite
from cubeagent.notation import parse_algorithm
from cubeagent.rig import script_from_jsonl, simulate

pytestmark = pytest.mark.usefixtures("tables_ready")


@pytest.fixture(scope="module")
def suite_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "suite.json"
    generate_suite(2, {"low": 1, "medium": 1, "high": 0}).save(path)
    return path


def test_solve_solved_is_empty(capsys):
    assert main(["solve", "--facelets", SOLVED_FACELETS]) == 0
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize("method", ["staged", "fast"])
def test_solve_scramble(capsys, method):
    start = apply_algorithm(identity(), parse_algorithm("R U R' F2 D L'"))
    assert main(["solve", "--facelets", to_facelets(start), "--method", method]) == 0
    alg = parse_algorithm(capsys.readouterr().out)
    assert is_solved(apply_algorithm(start, alg))


def test_solve_bad_facelets(capsys):
    assert main(["solve", "--facelets", "U" * 54]) == 2
    assert "cubeagent solve" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert main(["dance"]) == 2


def test_missing_argument(capsys):
    assert main(["scramble", "--seed", "1"]) == 2


def test_scramble(capsys):
    assert main(["scramble", "--len", "5", "--seed", "3", "--facelets"]) == 0
    alg_line, facelets = capsys.readouterr().out.splitlines()
    assert len(parse_algorithm(alg_line)) == 5
    assert facelets == to_facelets(apply_algorithm(identity(), parse_algorithm(alg_line)))


def test_gen_suite(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["gen-suite", "--seed", "4", "--out", str(out), "--counts", "2", "0", "0"]) == 0
    data = json.loads(out.read_text())
    assert len(data["tasks"]) == 2 and data["counts"]["low"] == 2


def test_agent_run_low_task(suite_file, tmp_path, capsys):
    report = tmp_path / "r.json"
    code = main(["agent-run", "--task", str(suite_file), "--id", "low-00", "--report", str(report)])
    assert code == 0
    data = json.loads(report.read_text())
    assert data["success"] and data["moves_used"] == 1


def test_agent_run_needs_id(suite_file, capsys):
    assert main(["agent-run", "--task", str(suite_file)]) == 2
    assert main(["agent-run", "--task", str(suite_file), "--id", "nope"]) == 2


def test_agent_run_failure_exit_code(suite_file, capsys):
    code = main(["agent-run", "--task", str(suite_file), "--id", "medium-00",
                 "--backend", "external", "--endpoint", "stdio:/nonexistent/planner"])
    assert code == 1
    assert "backend_unreachable" in capsys.readouterr().err


def test_agent_run_missing_file(tmp_path, capsys):
    assert main(["agent-run", "--task", str(tmp_path / "none.json")]) == 2


def test_bench_byte_identical(suite_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"enable_memory": True,
                               "backend": {"kind": "noisy", "p_wrong": 0.15, "p_stall": 0.05}}))
    outs = []
    for i in range(2):
        out = tmp_path / f"bench{i}.json"
        assert main(["bench", "--suite", str(suite_file), "--config", str(cfg), "--seeds", "2",
                     "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert "config" in capsys.readouterr().out


def test_bench_rejects_unknown_config_field(suite_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"turbo": True}))
    assert main(["bench", "--suite", str(suite_file), "--config", str(cfg)]) == 2


def test_ablate(suite_file, tmp_path, capsys):
    out = tmp_path / "abl.json"
    assert main(["ablate", "--suite", str(suite_file), "--seeds", "1", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "vlm-only" in text and "one-sided p" in text
    assert len(json.loads(out.read_text())["rows"]) == 4


def test_render(capsys):
    assert main(["render", "--facelets", SOLVED_FACELETS]) == 0
    assert capsys.readouterr().out.count("U") == 9


def test_compile_script(capsys):
    assert main(["compile-script", "--alg", "R U R' U'"]) == 0
    script = script_from_jsonl(capsys.readouterr().out)
    assert simulate(script, identity()) == apply_algorithm(identity(), "R U R' U'")


def test_compile_script_bad_alg(capsys):
    assert main(["compile-script", "--alg", "R Q"]) == 2
