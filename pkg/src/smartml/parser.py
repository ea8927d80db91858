"""Lexer and recursive-descent parser for SmartML source text."""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A

KEYWORDS = {
    "datatype", "constructor", "contract", "extends", "function", "if", "else",
    "while", "let", "in", "assert", "return", "throw", "try", "abort",
    "success", "new", "this", "true", "false", "super", "sender", "switch",
    "case", "default", "irrelevant", "int", "bool", "string", "address", "void",
}
TYPE_KEYWORDS = {"int", "bool", "string", "address", "void"}

# longest operators first
_PUNCT = [":=", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", ";",
          ",", ".", "$", "=", "<", ">", "+", "-", "*", "/", "!", ":", "|"]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<amount><amount>|⟨amount⟩)
  | (?P<int>[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>""" + "|".join(re.escape(p) for p in _PUNCT) + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


class ParseError(Exception):
    def __init__(self, message, line, col, expected=()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{line}:{col}: {message}{detail}")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | int | string | amount | punct | eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, text, line, m.start() - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "<eof>", line, pos - line_start + 1))
    return tokens


def _unescape(text):
    body = text[1:-1]
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("keyword", "punct", "amount") and t.text in texts

    def error(self, message, expected=()):
        t = self.tok
        raise ParseError(message, t.line, t.col, expected)

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error(f"unexpected {self.tok.text!r}", {text})
        t = self.tok
        self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.error(f"unexpected {t.text!r}", {"identifier"})
        self.i += 1
        return t.text

    def loc(self):
        return (self.tok.line, self.tok.col)

    # -- program

    def program(self) -> A.Program:
        adts, contracts = [], []
        while self.tok.kind != "eof":
            if self.at("datatype"):
                adts.append(self.adt())
            elif self.at("contract"):
                contracts.append(self.contract())
            else:
                self.error(f"unexpected {self.tok.text!r}", {"datatype", "contract"})
        return A.Program(tuple(adts), tuple(contracts))

    def type_(self) -> A.Type:
        t = self.tok
        if t.kind == "keyword" and t.text in TYPE_KEYWORDS:
            self.i += 1
            return A.PRIM_TYPES[t.text]
        if t.kind == "ident":
            self.i += 1
            return A.NamedType(t.text)
        self.error(f"unexpected {t.text!r}", {"type"})

    def at_type(self) -> bool:
        t = self.tok
        return (t.kind == "keyword" and t.text in TYPE_KEYWORDS) or t.kind == "ident"

    def params(self) -> tuple:
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                loc = self.loc()
                ty = self.type_()
                out.append(A.Param(ty, self.ident(), loc=loc))
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    def args(self) -> tuple:
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                out.append(self.expr())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    # -- ADTs

    def adt(self) -> A.AdtDecl:
        loc = self.loc()
        self.expect("datatype")
        name = self.ident()
        self.expect("{")
        self.expect("constructor")
        self.expect("{")
        ctors = [self.ctor()]
        while self.accept("|"):
            ctors.append(self.ctor())
        self.expect("}")
        fns = []
        while not self.at("}"):
            fns.append(self.adt_function())
        self.expect("}")
        return A.AdtDecl(name, tuple(ctors), tuple(fns), loc=loc)

    def ctor(self) -> A.Ctor:
        loc = self.loc()
        name = self.ident()
        params = self.params() if self.at("(") else ()
        return A.Ctor(name, params, loc=loc)

    def adt_function(self) -> A.AdtFunction:
        loc = self.loc()
        ret = self.type_()
        name = self.ident()
        params = self.params()
        self.expect("{")
        body = self.dexpr()
        self.expect("}")
        return A.AdtFunction(ret, name, params, body, loc=loc)

    def dexpr(self) -> A.DExpr:
        loc = self.loc()
        if self.accept("return"):
            e = self.expr()
            self.expect(";")
            return A.DReturn(e, loc=loc)
        if self.accept("if"):
            self.expect("(")
            c = self.expr()
            self.expect(")")
            self.expect("{")
            then = self.dexpr()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            orelse = self.dexpr()
            self.expect("}")
            return A.DIf(c, then, orelse, loc=loc)
        if self.accept("switch"):
            self.expect("(")
            scrut = self.expr()
            self.expect(")")
            self.expect("{")
            cases = []
            default = None
            while self.at("case"):
                cases.append(self.case())
            if self.accept("default"):
                self.expect(":")
                default = self.dexpr()
            self.expect("}")
            return A.DSwitch(scrut, tuple(cases), default, loc=loc)
        if self.tok.kind == "ident" and self.peek().text == "(":
            e = self.expr()
            self.expect(";")
            return A.DReturn(e, loc=loc)
        if self.at_type():
            ty = self.type_()
            var = self.ident()
            if not (self.accept("=") or self.accept(":=")):
                self.error(f"unexpected {self.tok.text!r}", {"=", ":="})
            value = self.expr()
            self.expect(";")
            return A.DLet(var, ty, value, self.dexpr(), loc=loc)
        self.error(f"unexpected {self.tok.text!r}", {"return", "if", "switch", "type"})

    def case(self) -> A.Case:
        loc = self.loc()
        self.expect("case")
        if self.tok.kind == "ident":
            name = self.ident()
            binders = []
            if self.accept("("):
                if not self.at(")"):
                    binders.append(self.ident())
                    while self.accept(","):
                        binders.append(self.ident())
                self.expect(")")
            self.expect(":")
            return A.Case(name, tuple(binders), None, self.dexpr(), loc=loc)
        lit = self.literal()
        self.expect(":")
        return A.Case(None, (), lit, self.dexpr(), loc=loc)

    def literal(self) -> A.Expr:
        loc = self.loc()
        t = self.tok
        if self.accept("-"):
            if self.tok.kind != "int":
                self.error(f"unexpected {self.tok.text!r}", {"integer"})
            v = -int(self.tok.text)
            self.i += 1
            return A.IntLit(v, loc=loc)
        if t.kind == "int":
            self.i += 1
            return A.IntLit(int(t.text), loc=loc)
        if t.kind == "string":
            self.i += 1
            return A.StrLit(_unescape(t.text), loc=loc)
        if self.accept("true"):
            return A.BoolLit(True, loc=loc)
        if self.accept("false"):
            return A.BoolLit(False, loc=loc)
        self.error(f"unexpected {t.text!r}", {"literal", "constructor"})

    # -- contracts

    def contract(self) -> A.ContractDecl:
        loc = self.loc()
        self.expect("contract")
        name = self.ident()
        parent = self.ident() if self.accept("extends") else None
        self.expect("{")
        fields, methods = [], []
        constructor = None
        while not self.at("}"):
            mloc = self.loc()
            if self.at("constructor"):
                if constructor is not None:
                    self.error("duplicate constructor")
                constructor = self.constructor()
            elif self.accept("irrelevant"):
                ty = self.type_()
                fname = self.ident()
                self.expect(";")
                fields.append(A.FieldDecl(ty, fname, True, loc=mloc))
            elif self.accept("function"):
                methods.append(self.method_rest(A.UNIT, mloc))
            elif self.at_type():
                ty = self.type_()
                if self.accept("function"):
                    methods.append(self.method_rest(ty, mloc))
                elif self.peek().text == "(":
                    methods.append(self.method_rest(ty, mloc))
                else:
                    fname = self.ident()
                    self.expect(";")
                    fields.append(A.FieldDecl(ty, fname, False, loc=mloc))
            else:
                self.error(f"unexpected {self.tok.text!r}",
                           {"constructor", "function", "irrelevant", "type", "}"})
        self.expect("}")
        return A.ContractDecl(name, parent, tuple(fields), constructor, tuple(methods), loc=loc)

    def method_rest(self, ret, loc) -> A.MethodDecl:
        name = self.ident()
        params = self.params()
        body = self.block()
        return A.MethodDecl(ret, name, params, body, loc=loc)

    def constructor(self) -> A.ConstructorDecl:
        loc = self.loc()
        self.expect("constructor")
        params = self.params()
        self.expect("{")
        super_args = None
        if self.accept("super"):
            super_args = self.args()
            self.expect(";")
        inits = []
        while not self.at("}"):
            if self.accept("this"):
                self.expect(".")
            fname = self.ident()
            if not (self.accept("=") or self.accept(":=")):
                self.error(f"unexpected {self.tok.text!r}", {"=", ":="})
            inits.append((fname, self.expr()))
            self.expect(";")
        self.expect("}")
        return A.ConstructorDecl(params, super_args, tuple(inits), loc=loc)

    # -- statements

    def block(self) -> A.Stmt:
        self.expect("{")
        s = self.stmts()
        self.expect("}")
        return s

    def stmts(self) -> A.Stmt:
        out = []
        while not self.at("}") and self.tok.kind != "eof":
            if self.at_decl():
                loc = self.loc()
                ty = self.type_()
                var = self.ident()
                if not (self.accept("=") or self.accept(":=")):
                    self.error(f"unexpected {self.tok.text!r}", {"=", ":="})
                rhs = self.expr()
                self.expect(";")
                out.append(A.Let(var, rhs, self.stmts(), ty, loc=loc))
                break
            out.append(self.stmt())
        return A.seq(out)

    def at_decl(self) -> bool:
        t = self.tok
        if t.kind == "keyword" and t.text in TYPE_KEYWORDS:
            return True
        return t.kind == "ident" and self.peek().kind == "ident"

    def stmt(self) -> A.Stmt:
        loc = self.loc()
        if self.accept("if"):
            self.expect("(")
            c = self.expr()
            self.expect(")")
            then = self.block()
            orelse = None
            if self.accept("else"):
                orelse = self.stmt() if self.at("if") else self.block()
            return A.If(c, then, orelse, loc=loc)
        if self.accept("while"):
            self.expect("(")
            c = self.expr()
            self.expect(")")
            return A.While(c, self.block(), loc=loc)
        if self.accept("let"):
            var = self.ident()
            self.expect(":=")
            rhs = self.expr()
            self.expect("in")
            return A.Let(var, rhs, self.block(), None, loc=loc)
        if self.accept("assert"):
            self.expect("(")
            c = self.expr()
            self.expect(")")
            self.expect(";")
            return A.Assert(c, loc=loc)
        if self.accept("return"):
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return A.Return(value, loc=loc)
        if self.accept("throw"):
            value = self.expr()
            self.expect(";")
            return A.Throw(value, loc=loc)
        if self.accept("try"):
            cloc = self.loc()
            call = self.simple_stmt(cloc)
            if not isinstance(call, (A.Call, A.CallAssign)):
                raise ParseError("try body must be a method invocation", cloc[0], cloc[1], {"invocation"})
            self.expect("abort")
            abort_var = None
            if self.accept("("):
                abort_var = self.ident()
                self.expect(")")
            abort = self.block()
            self.expect("success")
            success = self.block()
            return A.Try(call, abort_var, abort, success, loc=loc)
        return self.simple_stmt(loc)

    def simple_stmt(self, loc) -> A.Stmt:
        e = self.expr()
        if self.accept("=") or self.accept(":="):
            if not isinstance(e, (A.Var, A.Field)):
                raise ParseError("left-hand side must be a variable or this.f", loc[0], loc[1])
            rhs = self.expr()
            self.expect(";")
            if isinstance(rhs, A.DotCall) and not isinstance(rhs.receiver, A.DotCall):
                return A.CallAssign(e, rhs.receiver, rhs.name, rhs.args, rhs.value, loc=loc)
            return A.Assign(e, rhs, loc=loc)
        if isinstance(e, A.DotCall):
            self.expect(";")
            return A.Call(e.receiver, e.name, e.args, e.value, loc=loc)
        self.error(f"unexpected {self.tok.text!r}", {"=", ":=", "."})

    # -- expressions

    def expr(self) -> A.Expr:
        return self.or_()

    def or_(self):
        left = self.and_()
        while self.at("||"):
            loc = self.loc()
            self.i += 1
            left = A.BoolOp("||", left, self.and_(), loc=loc)
        return left

    def and_(self):
        left = self.cmp()
        while self.at("&&"):
            loc = self.loc()
            self.i += 1
            left = A.BoolOp("&&", left, self.cmp(), loc=loc)
        return left

    def cmp(self):
        left = self.add()
        while self.at("==", "!=", "<=", ">=", "<", ">"):
            loc = self.loc()
            op = self.tok.text
            self.i += 1
            left = A.BoolOp(op, left, self.add(), loc=loc)
        return left

    def add(self):
        left = self.mul()
        while self.at("+", "-"):
            loc = self.loc()
            op = self.tok.text
            self.i += 1
            left = A.BinOp(op, left, self.mul(), loc=loc)
        return left

    def mul(self):
        left = self.unary()
        while self.at("*", "/"):
            loc = self.loc()
            op = self.tok.text
            self.i += 1
            left = A.BinOp(op, left, self.unary(), loc=loc)
        return left

    def unary(self):
        loc = self.loc()
        if self.accept("!"):
            return A.Not(self.unary(), loc=loc)
        if self.at("-") and self.peek().kind == "int":
            return self.postfix(self.literal())
        return self.postfix(self.primary())

    def postfix(self, e):
        while True:
            loc = self.loc()
            if self.accept("."):
                name = self.ident()
                if self.at("("):
                    e = A.DotCall(e, name, self.args(), None, loc=loc)
                elif isinstance(e, A.This):
                    e = A.Field(name, loc=e.loc)
                else:
                    e = A.Proj(e, name, loc=loc)
            elif self.accept("$"):
                value = self.transfer_value()
                self.expect(".")
                name = self.ident()
                e = A.DotCall(e, name, self.args(), value, loc=loc)
            else:
                return e

    def transfer_value(self):
        loc = self.loc()
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("this"):
            self.expect(".")
            return A.Field(self.ident(), loc=loc)
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return A.IntLit(int(t.text), loc=loc)
        if t.kind == "ident":
            self.i += 1
            return A.Var(t.text, loc=loc)
        if self.accept("sender"):
            return A.Sender(loc=loc)
        if t.kind == "amount":
            self.i += 1
            return A.Amount(loc=loc)
        self.error(f"unexpected {t.text!r}", {"transfer value"})

    def primary(self):
        loc = self.loc()
        t = self.tok
        if t.kind in ("int", "string") or self.at("true", "false"):
            return self.literal()
        if t.kind == "amount":
            self.i += 1
            return A.Amount(loc=loc)
        if self.accept("this"):
            return A.This(loc=loc)
        if self.accept("sender"):
            return A.Sender(loc=loc)
        if self.accept("new"):
            name = self.ident()
            return A.New(name, self.args(), loc=loc)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.i += 1
            if self.at("("):
                return A.Apply(t.text, self.args(), loc=loc)
            return A.Var(t.text, loc=loc)
        self.error(f"unexpected {t.text!r}", {"expression"})


def parse_program(source: str) -> A.Program:
    """Parse SmartML source text into an unresolved :class:`Program`."""
    return Parser(source).program()


def parse_stmt(source: str) -> A.Stmt:
    p = Parser(source)
    s = p.stmts()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}", {"<eof>"})
    return s


def parse_expr(source: str) -> A.Expr:
    p = Parser(source)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}", {"<eof>"})
    return e
