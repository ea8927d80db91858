import pytest
from hypothesis import given, strategies as st

from smartml import ast as A
from smartml.interpreter import (Aborted, CallEnter, FieldWrite, FuelExhausted, Machine, Revert, Stuck,
                                 Terminated, execute)
from smartml.resolve import load
from smartml.runtime import ORIGIN, AdtValue, PermanentMemory, Ref

from conftest import corpus_text, load_corpus
from oracles import add, from_list_int, index_of, to_list_int, trunc_div


def deploy(src, contract, *ctor_args):
    r = load(src)
    m = Machine(r)
    pm, inst = m.exec_constructor(PermanentMemory(), contract, tuple(ctor_args))
    return r, m, pm, inst


def run(src, contract, method, args=(), ctor=(), fuel=10000, amount=0):
    r, m, pm, inst = deploy(src, contract, *ctor)
    return m.run(m.initial(pm, inst, method, tuple(args), amount=amount), fuel)


def test_listing1_adds():
    src = corpus_text("listing1.sml")
    res = run(src, "C", "m", (3,), ctor=(4,))
    assert isinstance(res.outcome, Terminated) and res.outcome.value == 7


def test_while_loop_and_let():
    src = "contract C { int s; function f(int n) { int i = 0; while (i < n) { s = s + i; i = i + 1; } } }"
    res = run(src, "C", "f", (5,))
    assert res.config.permanent.read(1, "s") == 10


def test_fuel_exhaustion():
    src = "contract C { function f() { while (true) { } } }"
    res = run(src, "C", "f", fuel=1)
    assert isinstance(res.outcome, FuelExhausted)


def test_assertion_aborts_and_restores():
    src = "contract C { int x; function f() { x = 5; assert(x < 3); } }"
    res = run(src, "C", "f")
    assert isinstance(res.outcome, Aborted)
    assert res.config.permanent.read(1, "x") == 0
    assert any(isinstance(e, Revert) for e in res.trace)


def test_missing_return_is_stuck():
    src = "contract C { int f() { } }"
    assert isinstance(run(src, "C", "f").outcome, Stuck)


SRC_TRY = """
contract B { int y; function boom() { y = 1; throw "no"; } int ok() { y = 2; return 9; } }
contract A {
  int r; B b; string why;
  constructor() { this.b = new B(); }
  function go() {
    try b.boom(); abort (e) { why = e; } success { r = 1; }
    try r = b.ok(); abort { r = -1; } success { }
  }
}
"""


def test_try_abort_rolls_back_callee_and_success_keeps_it():
    res = run(SRC_TRY, "A", "go")
    pm = res.config.permanent
    assert isinstance(res.outcome, Terminated)
    a, b = 1, 2  # B is allocated by A's constructor after A
    assert pm.contract_of(b) == "B"
    assert pm.read(a, "why") == "no"
    assert pm.read(a, "r") == 9
    assert pm.read(b, "y") == 2


def test_internal_call_shares_transaction():
    src = "contract C { int x; function f() { this.g(); assert(false); } function g() { x = 1; } }"
    res = run(src, "C", "f")
    assert isinstance(res.outcome, Aborted) and res.config.permanent.read(1, "x") == 0
    enters = [e for e in res.trace if isinstance(e, CallEnter)]
    assert [e.transactional for e in enters] == [True, False]


def test_value_transfer_moves_balance():
    src = """
    contract R { function take() { } }
    contract S { R r; constructor() { this.r = new R(); this.balance = 5; }
                 function pay() { r$3.take(); } }
    """
    res = run(src, "S", "pay")
    pm = res.config.permanent
    assert pm.read(1, "balance") == 2 and pm.read(2, "balance") == 3
    assert FieldWrite(1, "balance") in res.trace


def test_insufficient_balance_throws():
    src = """
    contract R { function take() { } }
    contract S { R r; constructor() { this.r = new R(); } function pay() { r$3.take(); } }
    """
    res = run(src, "S", "pay")
    assert isinstance(res.outcome, Aborted)


def test_root_amount_credited():
    src = "contract C { int f() { return balance; } }"
    res = run(src, "C", "f", amount=4)
    assert res.outcome.value == 4


def test_call_to_origin_aborts():
    src = "contract C { function f() { sender.g(); } function g() { } }"
    assert isinstance(run(src, "C", "f").outcome, Aborted)


def test_short_circuit():
    src = "contract C { bool f() { return false && 1 / 0 == 0; } }"
    assert run(src, "C", "f").outcome.value is False


@given(st.integers(-50, 50), st.integers(-50, 50).filter(lambda b: b != 0))
def test_division_truncates(a, b):
    src = f"contract C {{ int f() {{ return ({a}) / ({b}); }} }}"
    assert run(src, "C", "f").outcome.value == trunc_div(a, b)


def test_division_by_zero_throws():
    res = run("contract C { int f() { return 1 / 0; } }", "C", "f")
    assert isinstance(res.outcome, Aborted) and res.outcome.error == "DivisionByZero"


def test_store_attack_reenters():
    r = load_corpus("store_attacker.sml")
    m = Machine(r)
    pm, att = m.exec_constructor(PermanentMemory(), "Attacker", ())
    res = m.run(m.initial(pm, att, "attack"))
    assert isinstance(res.outcome, Terminated)
    calls = [(e.contract, e.method) for e in res.trace if isinstance(e, CallEnter)]
    assert calls.count(("Store", "transfer")) == 2


# ------------------------------------------------------------ ADT conformance

LISTS = load_corpus("lists.sml")
ADT = Machine(LISTS)


@given(st.lists(st.integers(-10, 10), max_size=5), st.integers(-10, 10))
def test_index_of_matches_hand_evaluation(xs, n):
    assert ADT.eval_adt("ListInt", "indexOf", (to_list_int(xs), n)) == index_of(xs, n)


@given(st.lists(st.integers(-10, 10), max_size=5), st.integers(-10, 10))
def test_add_matches_hand_evaluation(xs, n):
    assert from_list_int(ADT.eval_adt("ListInt", "add", (to_list_int(xs), n))) == add(xs, n)


def test_index_of_nil():
    assert ADT.eval_adt("ListInt", "indexOf", (AdtValue("nil"), 3)) == -1


def test_address_list():
    lst = AdtValue("entry", (Ref(1), AdtValue("entry", (Ref(2), AdtValue("empty")))))
    assert ADT.eval_adt("ListAddress", "indexOf", (lst, Ref(2))) == 1
    assert ADT.eval_adt("ListAddress", "indexOf", (lst, ORIGIN)) == -1


def test_execute_helper():
    r = load_corpus("listing1.sml")
    pm, i = Machine(r).exec_constructor(PermanentMemory(), "C", (1,))
    assert execute(r, pm, i, "m", (2,)).outcome.value == 3
