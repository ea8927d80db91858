import pytest

from smartml import ast as A
from smartml.parser import ParseError, parse_expr, parse_program, parse_stmt, tokenize
from smartml.pretty import expr, pretty_print, stmt

from conftest import CORPUS


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.sml")), ids=lambda p: p.name)
def test_corpus_round_trip(path):
    prog = parse_program(path.read_text())
    text = pretty_print(prog)
    assert parse_program(text) == prog
    assert pretty_print(parse_program(text)) == text


def test_listing1_shape():
    prog = parse_program((CORPUS / "listing1.sml").read_text())
    (c,) = prog.contracts
    assert c.name == "C" and [f.name for f in c.fields] == ["n"]
    assert c.constructor.inits[0][0] == "n"
    assert c.methods[0].ret == A.INT and c.methods[0].params[0].name == "x"


def test_precedence():
    e = parse_expr("1 + 2 * 3 == 7 && !false")
    assert isinstance(e, A.BoolOp) and e.op == "&&"
    left = e.left
    assert left.op == "==" and left.left.op == "+" and left.left.right.op == "*"


def test_negative_literal():
    assert parse_expr("-1") == A.IntLit(-1)
    assert parse_expr("x - 1").op == "-"


def test_transfer_call_and_amount():
    s = parse_stmt("sender$<amount>.receive();")
    assert isinstance(s, A.Call) and isinstance(s.value, A.Amount) and s.method == "receive"


def test_try_abort_success():
    s = parse_stmt("try x = a.f(1); abort { return false; } success { return true; }")
    assert isinstance(s, A.Try) and isinstance(s.call, A.CallAssign)
    assert isinstance(s.abort, A.Return) and isinstance(s.success, A.Return)


def test_let_and_typed_declaration():
    s = parse_stmt("let y := 3 in { x = y; }")
    assert isinstance(s, A.Let) and s.var == "y"
    d = parse_stmt("int z = 1; z = z + 1;")
    assert isinstance(d, A.Let) and d.decl_type == A.INT


@pytest.mark.parametrize("src", ["contract { }", "contract C { int x }", "contract C { function f() { x = ; } }"])
def test_errors_have_positions(src):
    with pytest.raises(ParseError) as info:
        parse_program(src)
    assert info.value.line >= 1 and info.value.col >= 1


def test_error_location_line():
    with pytest.raises(ParseError) as info:
        parse_program("contract C {\n  int x;\n  function f() { x = = 1; }\n}")
    assert info.value.line == 3


def test_comments_skipped():
    toks = tokenize("// hello\n/* block */ x")
    assert [t.text for t in toks if t.kind != "eof"] == ["x"]


def test_pretty_of_statement_reparses():
    src = "if (a < b) { x = 1; } else { while (x > 0) { x = x - 1; } }"
    s = parse_stmt(src)
    assert parse_stmt(stmt(s)) == s
    assert expr(parse_expr("(1 + 2) * 3")) == "(1 + 2) * 3"
