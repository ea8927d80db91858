import time
from collections import Counter

import pytest

from smartml import ast as A
from smartml.monitor import UNSAFE, classify_trace
from smartml.interpreter import Machine
from smartml.resolve import load
from smartml.runtime import PermanentMemory, Ref
from smartml.typesys import (Checker, Ident, Top, TypeMismatch, UnknownContract, UnknownMethod, check_contract,
                             check_program, definitely_returns, fields, locs, mbody, msub, mtype, type_of)

from conftest import corpus_text, load_corpus
from oracles import locs_oracle


def verdicts(src):
    return {c: r.verdict for c, r in check_program(load(src)).items()}


def test_case_study_rejected_at_receive():
    r = load_corpus("store_attacker.sml")
    t0 = time.perf_counter()
    report = check_contract(r, "Store")
    assert time.perf_counter() - t0 < 1.0
    assert report.verdict == "rejected"
    f = report.failures[0]
    assert (f.contract, f.method, f.rule) == ("Attacker", "receive", "Call")
    (call_ids, call_m), (locked_ids, locked_m) = f.conflict
    assert call_m == locked_m == "transfer"
    assert call_ids == frozenset({Top("Store")})
    assert all(isinstance(a, Ident) and a.contract == "Store" for a in locked_ids)


def test_cei_variant_accepted_via_call_safe():
    r = load_corpus("store_cei.sml")
    reports = check_program(r, explain=True)
    assert all(rep.ok for rep in reports.values())
    rules = []

    def walk(node):
        rules.append((node.rule, node.text))
        for c in node.children:
            walk(c)

    for d in reports["Store"].derivation:
        walk(d)
    assert any(rule == "Call-Safe" and "receive" in text for rule, text in rules)


def test_listing1_accepted():
    assert verdicts(corpus_text("listing1.sml")) == {"C": "ok"}


UNSAFE_PAIR = """
contract Bank {
  int credit;
  Client c;
  function pay() {
    if (credit > 0) { c.notify(); credit = 0; }
  }
}
contract Client {
  Bank bank;
  int n;
  function notify() { if (n < 1) { n = n + 1; bank.pay(); } }
}
"""


def test_write_after_external_call_rejected_and_monitor_agrees():
    r = load(UNSAFE_PAIR)
    assert check_contract(r, "Bank").verdict == "rejected"
    m = Machine(r)
    pm, bank = m.exec_constructor(PermanentMemory(), "Bank", ())
    pm, client = m.exec_constructor(pm, "Client", ())
    pm = pm.write(bank, "credit", 1).write(bank, "c", Ref(client)).write(client, "bank", Ref(bank))
    res = m.run(m.initial(pm, bank, "pay"), fuel=500)
    assert classify_trace(res.trace, r).level == UNSAFE


def test_irrelevant_write_after_call_accepted():
    src = UNSAFE_PAIR.replace("int credit;", "irrelevant int credit;")
    assert verdicts(src)["Bank"] == "ok"


def test_effects_before_interaction_accepted():
    src = UNSAFE_PAIR.replace("c.notify(); credit = 0;", "credit = 0; c.notify();")
    assert verdicts(src) == {"Bank": "ok", "Client": "ok"}


@pytest.mark.parametrize("body,rule", [
    ("int f() { return true; }", "Return"),
    ("function f() { x = true; }", "Assign"),
    ("int f() { x = 1; }", "Mth-Ok"),
    ("function f() { assert(1); }", "Assert"),
    ("function f() { if (x) { } }", "If-Else"),
    ('function f() { throw 3; }', "Throw"),
])
def test_value_typing_failures(body, rule):
    r = load("contract C { int x; " + body + " }")
    report = check_contract(r, "C")
    assert report.verdict == "rejected" and report.failures[0].rule == rule


def test_direct_self_recursion_with_pending_write_rejected():
    src = "contract C { int x; C o; function f() { o.f(); x = 1; } }"
    assert verdicts(src) == {"C": "rejected"}


def test_tail_self_recursion_accepted():
    src = "contract C { int x; C o; function f() { x = 1; o.f(); } }"
    assert verdicts(src) == {"C": "ok"}


def test_alias_intersection():
    r = load("contract P { } contract Q extends P { } contract R { }")
    ch = Checker(r)
    i, j = Ident(1, "Q"), Ident(2, "Q")
    assert ch.intersects({i}, {i}) and not ch.intersects({i}, {j})
    assert ch.intersects({i}, {Top("P")}) and ch.intersects({Top("P")}, {Top("Q")})
    assert not ch.intersects({Top("P")}, {Top("R")}) and not ch.intersects({i}, {Top("R")})


def test_lookups():
    r = load_corpus("store_attacker.sml")
    assert ("balances", A.AdtType("ListInt")) in fields(r, "Store")
    assert mtype(r, "Store", "transfer") == ((A.INT, A.INT), A.BOOL)
    assert mbody(r, "Attacker", "attack") is not None
    with pytest.raises(UnknownContract):
        fields(r, "Nope")
    with pytest.raises(UnknownMethod):
        mtype(r, "Store", "nope")


def test_type_of_expressions():
    r = load("contract C { int x; }")
    g = {"b": A.BOOL}
    assert type_of(r, g, A.BinOp("+", A.Field("x"), A.IntLit(1)), "C") == A.INT
    with pytest.raises(TypeMismatch):
        type_of(r, g, A.BinOp("+", A.Var("b"), A.IntLit(1)), "C")


def test_locs_counts_sites():
    r = load("contract C { int x; int y; D d; function f() { x = x + y; this.g(); d.h(); } "
             "function g() { y = 1; } } contract D { function h() { } }")
    ids = frozenset({Ident(1, "C")})
    got = locs(r, ids, r.mbody("C", "f"), "C")
    a = Ident(1, "C")
    # x: read + write, plus the external call touching every field
    assert got[(a, "x")] == 3 and got[(a, "y")] == 3 and got[(a, "d")] == 2 and got[(a, "balance")] == 1
    assert got == locs_oracle(r, ids, r.mbody("C", "f"), "C")


def test_locs_handles_recursion():
    r = load("contract C { int x; function f() { x = 1; this.f(); } }")
    ids = {Top("C")}
    assert locs(r, ids, r.mbody("C", "f"), "C") == Counter({(Top("C"), "x"): 2})


def test_msub_floors_at_zero():
    assert msub(Counter(a=1), Counter(a=3, b=1)) == Counter()


def test_definitely_returns():
    r = load("contract C { int f(bool b) { if (b) { return 1; } else { throw \"e\"; } } }")
    assert definitely_returns(r.mbody("C", "f"))
    assert not definitely_returns(A.If(A.BoolLit(True), A.Return(A.IntLit(1)), None))


def test_check_residual():
    r = load_corpus("store_cei.sml")
    ch = Checker(r)
    decl = r.lookup_method("Store", "transfer")[1]
    rest = A.flatten(decl.body)[1:]
    gamma = dict(r.locals[("Store", "transfer")])
    ch.check_residual("Store", "transfer", rest, gamma)


def test_subcontract_overrides_are_checked():
    src = """
    contract Base { int x; function hook() { } function run() { this.hook(); x = 1; } }
    contract Evil extends Base { Base other; function hook() { other.run(); } }
    """
    v = verdicts(src)
    assert v["Evil"] == "rejected"
