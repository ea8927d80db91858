"""Abstract syntax for SmartML programs.

Nodes are frozen dataclasses.  Source positions live in ``loc`` and are
excluded from equality, so two parses of differently formatted text compare
equal when their structure does.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class Node:
    loc: Optional[tuple] = field(default=None, compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class PrimType(Type):
    name: str  # int | bool | string | address | unit

    def __str__(self):
        return "void" if self.name == "unit" else self.name


@dataclass(frozen=True)
class NamedType(Type):
    """A type name not yet resolved to an ADT or a contract."""
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class AdtType(Type):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class ContractType(Type):
    name: str

    def __str__(self):
        return self.name


INT = PrimType("int")
BOOL = PrimType("bool")
STRING = PrimType("string")
ADDRESS = PrimType("address")
UNIT = PrimType("unit")
STM = PrimType("stm")

PRIM_TYPES = {"int": INT, "bool": BOOL, "string": STRING, "address": ADDRESS, "void": UNIT}


# ---------------------------------------------------------- expressions

@dataclass(frozen=True)
class Expr(Node):
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Field(Expr):
    """``this.f``; bare field names are rewritten to this by resolution."""
    name: str


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class StrLit(Expr):
    value: str


@dataclass(frozen=True)
class This(Expr):
    pass


@dataclass(frozen=True)
class Sender(Expr):
    pass


@dataclass(frozen=True)
class Amount(Expr):
    pass


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


ARITH_OPS = ("+", "-", "*", "/")
BOOL_OPS = ("<=", ">=", "<", ">", "==", "!=", "&&", "||")


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of ARITH_OPS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp(Expr):
    op: str  # one of BOOL_OPS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class New(Expr):
    contract: str
    args: tuple


@dataclass(frozen=True)
class DotCall(Expr):
    """``recv[$value].name(args)`` before resolution decides what it is.

    Resolution turns it into an :class:`AdtCall` when the receiver has an
    ADT type; at statement level with a contract receiver it becomes a
    :class:`Call` / :class:`CallAssign`.
    """
    receiver: Expr
    name: str
    args: tuple
    value: Optional[Expr] = None


@dataclass(frozen=True)
class Proj(Expr):
    """Projection ``e.f`` of a constructor argument of an ADT value."""
    target: Expr
    name: str


@dataclass(frozen=True)
class Apply(Expr):
    """Unresolved ``n(args)``: an ADT function call or a constructor."""
    name: str
    args: tuple


@dataclass(frozen=True)
class AdtCall(Expr):
    adt: str
    fn: str
    args: tuple


@dataclass(frozen=True)
class AdtCons(Expr):
    adt: str
    ctor: str
    args: tuple


# ------------------------------------------------------------ statements

@dataclass(frozen=True)
class Stmt(Node):
    pass


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    rest: Stmt


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Optional[Stmt] = None


@dataclass(frozen=True)
class While(Stmt):
    cond: Expr
    body: Stmt


@dataclass(frozen=True)
class Let(Stmt):
    """``let x := rhs in { body }`` or the declaration form ``T x = rhs; body``."""
    var: str
    rhs: Expr
    body: Stmt
    decl_type: Optional[Type] = None


@dataclass(frozen=True)
class Assert(Stmt):
    cond: Expr


@dataclass(frozen=True)
class Assign(Stmt):
    target: Expr  # Var or Field
    rhs: Expr


@dataclass(frozen=True)
class Call(Stmt):
    receiver: Expr
    method: str
    args: tuple
    value: Optional[Expr] = None


@dataclass(frozen=True)
class CallAssign(Stmt):
    target: Expr
    receiver: Expr
    method: str
    args: tuple
    value: Optional[Expr] = None


@dataclass(frozen=True)
class Return(Stmt):
    value: Optional[Expr] = None


@dataclass(frozen=True)
class Throw(Stmt):
    value: Expr


@dataclass(frozen=True)
class Try(Stmt):
    call: Stmt  # Call or CallAssign
    abort_var: Optional[str]
    abort: Stmt
    success: Stmt


@dataclass(frozen=True)
class Hole(Stmt):
    """The ``?`` marker of a suspended call site inside a frame's
    continuation; ``target`` receives the callee's return value."""
    target: Optional[Expr] = None
    transactional: bool = True


def seq(stmts) -> Stmt:
    """Right-nested sequence of ``stmts``; Skip when empty."""
    stmts = list(stmts)
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def flatten(s: Stmt) -> tuple:
    """Statements of a sequence in execution order, dropping Skips."""
    out = []
    stack = [s]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Seq):
            stack.append(cur.rest)
            stack.append(cur.first)
        elif not isinstance(cur, Skip):
            out.append(cur)
    return tuple(out)


# ---------------------------------------------------------- ADT bodies

@dataclass(frozen=True)
class DExpr(Node):
    pass


@dataclass(frozen=True)
class DReturn(DExpr):
    value: Expr


@dataclass(frozen=True)
class DIf(DExpr):
    cond: Expr
    then: DExpr
    orelse: DExpr


@dataclass(frozen=True)
class DLet(DExpr):
    var: str
    decl_type: Type
    value: Expr
    body: DExpr


@dataclass(frozen=True)
class Case(Node):
    """``case pattern: body``.  ``pattern`` is a constructor name (with
    optional binders) or a literal expression."""
    ctor: Optional[str]
    binders: tuple
    literal: Optional[Expr]
    body: DExpr


@dataclass(frozen=True)
class DSwitch(DExpr):
    scrutinee: Expr
    cases: tuple
    default: Optional[DExpr] = None


# ---------------------------------------------------------- declarations

@dataclass(frozen=True)
class Param(Node):
    type: Type
    name: str


@dataclass(frozen=True)
class Ctor(Node):
    name: str
    params: tuple  # of Param


@dataclass(frozen=True)
class AdtFunction(Node):
    ret: Type
    name: str
    params: tuple
    body: DExpr


@dataclass(frozen=True)
class AdtDecl(Node):
    name: str
    ctors: tuple
    functions: tuple

    def ctor(self, name):
        for c in self.ctors:
            if c.name == name:
                return c
        return None

    def function(self, name):
        for f in self.functions:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class FieldDecl(Node):
    type: Type
    name: str
    irrelevant: bool = False


@dataclass(frozen=True)
class ConstructorDecl(Node):
    params: tuple
    super_args: Optional[tuple]
    inits: tuple  # of (field name, rhs expr)


@dataclass(frozen=True)
class MethodDecl(Node):
    ret: Type
    name: str
    params: tuple
    body: Stmt


@dataclass(frozen=True)
class ContractDecl(Node):
    name: str
    parent: Optional[str]
    fields: tuple
    constructor: Optional[ConstructorDecl]
    methods: tuple

    def method(self, name):
        for m in self.methods:
            if m.name == name:
                return m
        return None


@dataclass(frozen=True)
class Program(Node):
    adts: tuple = ()
    contracts: tuple = ()
