import json
import subprocess
import sys

import pytest

from smartml.cli import main, parse_literal
from smartml.runtime import Ref

from conftest import CORPUS

L1 = str(CORPUS / "listing1.sml")
ATTACK = str(CORPUS / "store_attacker.sml")
CEI = str(CORPUS / "store_cei.sml")


def test_parse_ok(capsys):
    assert main(["parse", L1]) == 0
    assert "contract C" in capsys.readouterr().out


def test_parse_json(capsys):
    assert main(["parse", L1, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["program"]["contracts"][0]["name"] == "C"


def test_missing_file_exit_2(tmp_path):
    assert main(["parse", str(tmp_path / "nope.sml")]) == 2


def test_syntax_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.sml"
    bad.write_text("contract C {\n int x\n}")
    assert main(["parse", str(bad)]) == 1
    assert "3:1" in capsys.readouterr().err


def test_check_verdicts(capsys):
    assert main(["check", L1]) == 0
    assert main(["check", CEI]) == 0
    capsys.readouterr()
    assert main(["check", ATTACK]) == 1
    out = capsys.readouterr().out
    assert "Attacker.receive" in out and "transfer" in out


def test_check_json_names_conflict(capsys):
    assert main(["check", ATTACK, "--format", "json"]) == 1
    doc = json.loads(capsys.readouterr().out)
    store = next(c for c in doc["contracts"] if c["contract"] == "Store")
    f = store["failures"][0]
    assert (f["contract"], f["method"]) == ("Attacker", "receive")
    assert f["conflict"]["call"][1] == f["conflict"]["locked"][1] == "transfer"


def test_check_explain_prints_derivation(capsys):
    assert main(["check", CEI, "--explain"]) == 0
    assert "[Call-Safe]" in capsys.readouterr().out


def test_run_listing1(capsys):
    assert main(["run", L1, "--entry", "C.m", "--arg", "4", "--arg", "3"]) == 0
    assert capsys.readouterr().out.strip() == "7"


def test_run_fuel(tmp_path):
    loop = tmp_path / "loop.sml"
    loop.write_text("contract L { function f() { while (true) { } } }")
    assert main(["run", str(loop), "--entry", "L.f", "--fuel", "1"]) == 5


def test_run_exit_codes(tmp_path):
    p = tmp_path / "p.sml"
    p.write_text("contract P { function a() { throw \"x\"; } int s() { } }")
    assert main(["run", str(p), "--entry", "P.a", "--unsafe"]) == 3
    assert main(["run", str(p), "--entry", "P.s", "--unsafe"]) == 4
    assert main(["run", str(p), "--entry", "P.nope", "--unsafe"]) == 1


def test_run_refuses_rejected_program():
    assert main(["run", ATTACK, "--entry", "Attacker.attack"]) == 1


def test_run_unsafe_trace_is_jsonl(capsys):
    code = main(["run", ATTACK, "--entry", "Attacker.attack", "--unsafe", "--format", "json"])
    assert code in (0, 3)
    lines = capsys.readouterr().out.splitlines()
    head = json.loads(lines[0])
    events = [json.loads(line) for line in lines[1:]]
    assert head["outcome"] in ("Terminated", "Aborted")
    assert any(e["event"] == "CallEnter" and e["method"] == "transfer" for e in events)


def test_monitor_attack_unsafe(capsys):
    assert main(["monitor", ATTACK, "--entry", "Attacker.attack", "--unsafe"]) == 1
    assert "Unsafe" in capsys.readouterr().out


def test_monitor_fuzz_listing1(capsys):
    assert main(["monitor", L1, "--fuzz", "--seed", "7", "--budget", "20"]) == 0
    assert "StrictSafe" in capsys.readouterr().out


def test_monitor_is_deterministic(capsys):
    argv = ["monitor", CEI, "--fuzz", "--seed", "4", "--budget", "15", "--format", "json"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first
    assert json.loads(first)["schema"] == "smartml.monitor/1"


def test_multiple_files_concatenate(tmp_path, capsys):
    a = tmp_path / "a.sml"
    b = tmp_path / "b.sml"
    a.write_text("contract A { B b; }")
    b.write_text("contract B { }")
    assert main(["check", str(a), str(b)]) == 0


@pytest.mark.parametrize("text,value", [("3", 3), ("-2", -2), ("true", True), ('"hi"', "hi"), ("#4", Ref(4))])
def test_literals(text, value):
    assert parse_literal(text) == value


def test_no_color_when_disabled(monkeypatch, capsys):
    monkeypatch.setenv("SMARTML_COLOR", "0")
    main(["check", L1])
    assert "\033[" not in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "smartml", "check", L1], capture_output=True, text=True)
    assert out.returncode == 0 and "C: ok" in out.stdout
