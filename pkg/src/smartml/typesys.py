"""Reentrancy type system.

The judgment threads a context ``(gamma, delta, theta, sigma)`` through a
method body:

* ``gamma``  variable types,
* ``delta``  locked ``(alias set, method)`` pairs,
* ``theta``  alias sets of contract-typed locations,
* ``sigma``  the multiset of field locations the body has yet to access.

Contract identities are symbolic.  An alias set is a frozenset of atoms,
each either an :class:`Ident` or ``Top(C)``, which stands for every
identity of type ``C`` or of a subtype of ``C``.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field, fields as dc_fields

from . import ast as A
from .pretty import expr as show_expr, stmt as show_stmt
from .resolve import BALANCE, Resolved


class UnknownContract(KeyError):
    pass


class UnknownMethod(KeyError):
    pass


class TypeMismatch(Exception):
    pass


class Rejection(Exception):
    def __init__(self, failure):
        super().__init__(failure.message)
        self.failure = failure


# ------------------------------------------------------------- identities

@dataclass(frozen=True, order=True)
class Ident:
    sym: int
    contract: str

    def __str__(self):
        return f"ι{self.sym}:{self.contract}"


@dataclass(frozen=True, order=True)
class Top:
    contract: str

    def __str__(self):
        return f"⊤{self.contract}"


def atom_type(a) -> str:
    return a.contract


def show_ids(ids) -> str:
    return "{" + ", ".join(str(a) for a in sorted(ids, key=str)) + "}"


# --------------------------------------------------------------- lookups

def fields(r: Resolved, c):
    if c not in r.contracts:
        raise UnknownContract(c)
    return [(f.name, f.type) for f in r.fields(c)]


def mtype(r: Resolved, c, m):
    if c not in r.contracts:
        raise UnknownContract(c)
    sig = r.mtype(c, m)
    if sig is None:
        raise UnknownMethod(f"{c}.{m}")
    return sig


def mbody(r: Resolved, c, m):
    if c not in r.contracts:
        raise UnknownContract(c)
    body = r.mbody(c, m)
    if body is None:
        raise UnknownMethod(f"{c}.{m}")
    return body


# ------------------------------------------------------------ value typing

def is_subtype(r: Resolved, t1, t2) -> bool:
    return r.subtype(t1, t2)


def type_of(r: Resolved, gamma, e, this_type=None):
    """Type of expression ``e`` under ``gamma``; raises :class:`TypeMismatch`."""
    def sub(a, b):
        return r.subtype(a, b)

    if isinstance(e, A.IntLit):
        return A.INT
    if isinstance(e, A.BoolLit):
        return A.BOOL
    if isinstance(e, A.StrLit):
        return A.STRING
    if isinstance(e, A.Var):
        if e.name not in gamma:
            raise TypeMismatch(f"unbound variable {e.name}")
        return gamma[e.name]
    if isinstance(e, A.Field):
        f = r.field(this_type, e.name) if this_type else None
        if f is None:
            raise TypeMismatch(f"unknown field {e.name}")
        return f.type
    if isinstance(e, A.This):
        if this_type is None:
            raise TypeMismatch("this outside a contract")
        return A.ContractType(this_type)
    if isinstance(e, A.Sender):
        return A.ADDRESS
    if isinstance(e, A.Amount):
        return A.INT
    if isinstance(e, A.Not):
        if type_of(r, gamma, e.operand, this_type) != A.BOOL:
            raise TypeMismatch("! needs a bool")
        return A.BOOL
    if isinstance(e, A.BinOp):
        lt = type_of(r, gamma, e.left, this_type)
        rt = type_of(r, gamma, e.right, this_type)
        if lt != A.INT or rt != A.INT:
            raise TypeMismatch(f"{e.op} needs int operands, got {lt} and {rt}")
        return A.INT
    if isinstance(e, A.BoolOp):
        lt = type_of(r, gamma, e.left, this_type)
        rt = type_of(r, gamma, e.right, this_type)
        if e.op in ("&&", "||"):
            ok = lt == rt == A.BOOL
        elif e.op in ("==", "!="):
            ok = sub(lt, rt) or sub(rt, lt) or _both_refs(lt, rt)
        else:
            ok = lt == rt == A.INT
        if not ok:
            raise TypeMismatch(f"{e.op} cannot compare {lt} and {rt}")
        return A.BOOL
    if isinstance(e, A.AdtCons):
        k = r.adts[e.adt].ctor(e.ctor)
        _check_args(r, gamma, e.args, [p.type for p in k.params], this_type, e.ctor)
        return A.AdtType(e.adt)
    if isinstance(e, A.AdtCall):
        fn = r.adts[e.adt].function(e.fn)
        _check_args(r, gamma, e.args, [p.type for p in fn.params], this_type, e.fn)
        return fn.ret
    if isinstance(e, A.Proj):
        t = type_of(r, gamma, e.target, this_type)
        if isinstance(t, A.AdtType):
            for k in r.adts[t.name].ctors:
                for p in k.params:
                    if p.name == e.name:
                        return p.type
        raise TypeMismatch(f"{t} has no argument {e.name}")
    if isinstance(e, A.New):
        params = r.constructor_params(e.contract)
        _check_args(r, gamma, e.args, [p.type for p in params], this_type, "new " + e.contract)
        return A.ContractType(e.contract)
    raise TypeMismatch(f"cannot type {type(e).__name__}")


def _both_refs(a, b):
    refs = (A.ContractType,)
    return (isinstance(a, refs) or a == A.ADDRESS) and (isinstance(b, refs) or b == A.ADDRESS)


def _check_args(r, gamma, args, types, this_type, what):
    if len(args) != len(types):
        raise TypeMismatch(f"{what} takes {len(types)} arguments")
    for a, t in zip(args, types):
        at = type_of(r, gamma, a, this_type)
        if not r.subtype(at, t):
            raise TypeMismatch(f"{what}: argument {show_expr(a)} has type {at}, expected {t}")


def type_value(r: Resolved, gamma, e, this_type=None):
    return type_of(r, gamma, e, this_type)


# ------------------------------------------------------------------- locs

def _expr_children(e):
    if isinstance(e, A.Not):
        return (e.operand,)
    if isinstance(e, (A.BinOp, A.BoolOp)):
        return (e.left, e.right)
    if isinstance(e, (A.New, A.AdtCall, A.AdtCons)):
        return e.args
    if isinstance(e, A.Proj):
        return (e.target,)
    return ()


def locs(r: Resolved, ids, p, this_type, _visiting=None) -> Counter:
    """Multiset of ``(atom, field)`` locations accessed by ``p`` when
    ``this`` is any identity in ``ids``; one count per access site."""
    out = Counter()
    _locs(r, frozenset(ids), p, this_type, out, _visiting or frozenset())
    return out


def _add_fields(r, ids, names, out):
    for a in ids:
        for f in names:
            out[(a, f)] += 1


def _locs(r, ids, p, this_type, out, visiting):
    if p is None:
        return
    if isinstance(p, A.Field):
        _add_fields(r, ids, (p.name,), out)
        return
    if isinstance(p, A.Expr):
        for c in _expr_children(p):
            _locs(r, ids, c, this_type, out, visiting)
        return
    if isinstance(p, A.Seq):
        _locs(r, ids, p.first, this_type, out, visiting)
        _locs(r, ids, p.rest, this_type, out, visiting)
    elif isinstance(p, A.If):
        _locs(r, ids, p.cond, this_type, out, visiting)
        _locs(r, ids, p.then, this_type, out, visiting)
        _locs(r, ids, p.orelse, this_type, out, visiting)
    elif isinstance(p, A.While):
        _locs(r, ids, p.cond, this_type, out, visiting)
        _locs(r, ids, p.body, this_type, out, visiting)
    elif isinstance(p, A.Let):
        _locs(r, ids, p.rhs, this_type, out, visiting)
        _locs(r, ids, p.body, this_type, out, visiting)
    elif isinstance(p, (A.Assert,)):
        _locs(r, ids, p.cond, this_type, out, visiting)
    elif isinstance(p, (A.Return, A.Throw)):
        _locs(r, ids, p.value, this_type, out, visiting)
    elif isinstance(p, A.Assign):
        _locs(r, ids, p.target, this_type, out, visiting)
        _locs(r, ids, p.rhs, this_type, out, visiting)
    elif isinstance(p, (A.Call, A.CallAssign)):
        if isinstance(p, A.CallAssign):
            _locs(r, ids, p.target, this_type, out, visiting)
        _locs(r, ids, p.receiver, this_type, out, visiting)
        for a in p.args:
            _locs(r, ids, a, this_type, out, visiting)
        _locs(r, ids, p.value, this_type, out, visiting)
        if isinstance(p.receiver, A.This):
            if p.value is not None:
                _add_fields(r, ids, (BALANCE,), out)
            key = (this_type, p.method)
            body = r.mbody(this_type, p.method) if this_type else None
            if body is not None and key not in visiting:
                _locs(r, ids, body, this_type, out, visiting | {key})
        else:
            for a in ids:
                _add_fields(r, (a,), [f.name for f in r.fields(atom_type(a))], out)
    elif isinstance(p, A.Try):
        _locs(r, ids, p.call, this_type, out, visiting)
        _locs(r, ids, p.abort, this_type, out, visiting)
        _locs(r, ids, p.success, this_type, out, visiting)
    elif isinstance(p, (A.Skip, A.Hole)):
        pass
    else:
        raise TypeError(f"locs: unexpected {type(p).__name__}")


def msub(a: Counter, b: Counter) -> Counter:
    """Multiset difference with multiplicities floored at zero."""
    out = Counter(a)
    out.subtract(b)
    return +out


def madd(a: Counter, b: Counter) -> Counter:
    return a + b


# ---------------------------------------------------------------- context

@dataclass(frozen=True)
class Context:
    gamma: dict
    delta: frozenset  # of (frozenset atoms, method)
    theta: dict       # ("v", name) | ("f", name) -> frozenset atoms
    sigma: Counter = field(default_factory=Counter)

    def with_(self, **kw):
        d = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        d.update(kw)
        return Context(**d)


@dataclass
class Failure:
    contract: str
    method: str
    loc: object
    rule: str
    message: str
    conflict: object = None  # ((alias set, method), (locked alias set, method))
    trail: tuple = ()        # call chain leading to the failing check

    def to_json(self):
        d = {"contract": self.contract, "method": self.method, "rule": self.rule,
             "message": self.message, "trail": list(self.trail)}
        d["line"], d["col"] = (self.loc if self.loc else (None, None))
        if self.conflict is not None:
            (ids, m), (lids, lm) = self.conflict
            d["conflict"] = {"call": [show_ids(ids), m], "locked": [show_ids(lids), lm]}
        return d

    def __str__(self):
        where = f"{self.loc[0]}:{self.loc[1]} " if self.loc else ""
        return f"{where}{self.contract}.{self.method}: [{self.rule}] {self.message}"


@dataclass
class Derivation:
    rule: str
    text: str
    children: list = field(default_factory=list)
    ok: bool = True

    def to_json(self):
        return {"rule": self.rule, "text": self.text, "ok": self.ok,
                "children": [c.to_json() for c in self.children]}

    def render(self, depth=0):
        mark = "" if self.ok else "  ✗"
        lines = ["  " * depth + f"[{self.rule}] {self.text}{mark}"]
        for c in self.children:
            lines.extend(c.render(depth + 1))
        return lines


@dataclass
class CheckReport:
    contract: str
    verdict: str = "ok"
    failures: list = field(default_factory=list)
    derivation: object = None

    @property
    def ok(self):
        return self.verdict == "ok"

    def to_json(self):
        d = {"contract": self.contract, "verdict": self.verdict,
             "failures": [f.to_json() for f in self.failures]}
        if self.derivation is not None:
            d["derivation"] = [x.to_json() for x in self.derivation]
        return d


def _short(s):
    text = show_stmt(s).splitlines()
    return text[0] + (" ..." if len(text) > 1 else "") if text else ""


@dataclass
class _Scope:
    """Static information fixed for one method check."""
    this_ids: frozenset
    this_type: str
    method: str
    ret: object
    trail: tuple


# ---------------------------------------------------------------- checker

class Checker:
    def __init__(self, program: Resolved, explain=False):
        self.r = program
        self.explain = explain
        self._fresh = itertools.count(1)
        self._progress = []   # stack of in-progress callee keys
        self._memo = {}       # key -> Failure or None

    def fresh_ident(self, contract) -> Ident:
        return Ident(next(self._fresh), contract)

    # -- alias sets

    def intersects(self, s1, s2) -> bool:
        for a in s1:
            for b in s2:
                if self._atoms_meet(a, b):
                    return True
        return False

    def _atoms_meet(self, a, b):
        if isinstance(a, Ident) and isinstance(b, Ident):
            return a == b
        if isinstance(a, Ident):
            return self.r.is_subcontract(a.contract, b.contract)
        if isinstance(b, Ident):
            return self.r.is_subcontract(b.contract, a.contract)
        return self.r.is_subcontract(a.contract, b.contract) or self.r.is_subcontract(b.contract, a.contract)

    def irrelevant(self, loc) -> bool:
        atom, f = loc
        return self.r.is_irrelevant(atom_type(atom), f)

    def all_irrelevant(self, ms: Counter) -> bool:
        return all(self.irrelevant(k) for k, n in ms.items() if n > 0)

    def theta_init(self, this_type):
        theta = {}
        for f in self.r.fields(this_type):
            if isinstance(f.type, A.ContractType):
                theta[("f", f.name)] = frozenset({Top(f.type.name)})
        return theta

    def _reset_fields(self, theta, this_type):
        out = {k: v for k, v in theta.items() if k[0] != "f"}
        out.update(self.theta_init(this_type))
        return out

    # -- contract / method level

    def check_contract(self, c) -> CheckReport:
        """Cnt-Ok: every method callable on ``c`` (own and inherited) must check."""
        if c not in self.r.contracts:
            raise UnknownContract(c)
        report = CheckReport(c)
        derivs = [] if self.explain else None
        ident = self.fresh_ident(c)
        try:
            self._check_constructor(c)
        except Rejection as rej:
            report.failures.append(rej.failure)
        for name in self._callable_methods(c):
            owner, decl = self.r.lookup_method(c, name)
            node = Derivation("Mth-Ok", f"{c}.{name}") if self.explain else None
            try:
                self.check_method(frozenset({ident}), c, decl, node=node)
            except Rejection as rej:
                if not any(f.to_json() == rej.failure.to_json() for f in report.failures):
                    report.failures.append(rej.failure)
                if node is not None:
                    node.ok = False
            if derivs is not None:
                derivs.append(node)
        report.verdict = "rejected" if report.failures else "ok"
        report.derivation = derivs
        return report

    def _callable_methods(self, c):
        seen, out = set(), []
        for anc in self.r.ancestors(c):
            for m in self.r.contracts[anc].methods:
                if m.name not in seen:
                    seen.add(m.name)
                    out.append(m.name)
        return out

    def _check_constructor(self, c):
        decl = self.r.contracts[c]
        k = decl.constructor
        if k is None:
            return
        gamma = {p.name: p.type for p in k.params}
        exprs = list(k.super_args or ())
        try:
            if decl.parent is not None:
                _check_args(self.r, gamma, exprs, [p.type for p in self.r.constructor_params(decl.parent)],
                            c, "super")
            for name, rhs in k.inits:
                t = type_of(self.r, gamma, rhs, c)
                ft = self.r.field(c, name).type
                if not self.r.subtype(t, ft):
                    raise TypeMismatch(f"field {name} of type {ft} initialised with {t}")
        except TypeMismatch as exc:
            raise Rejection(Failure(c, "constructor", k.loc, "Cnt-Ok", str(exc))) from None

    def check_method(self, this_ids, this_type, decl, delta=frozenset(), trail=(), node=None):
        """Mth-Ok for ``decl`` running on an instance of ``this_type``."""
        gamma = {p.name: p.type for p in decl.params}
        theta = self.theta_init(this_type)
        for p in decl.params:
            if isinstance(p.type, A.ContractType):
                theta[("v", p.name)] = frozenset({Top(p.type.name)})
        sigma = locs(self.r, this_ids, decl.body, this_type)
        scope = _Scope(this_ids, this_type, decl.name, decl.ret, trail + (f"{this_type}.{decl.name}",))
        ctx = Context(gamma, frozenset(delta), theta, sigma)
        self.check_stmt(ctx, scope, decl.body, node)
        if decl.ret != A.UNIT and not definitely_returns(decl.body):
            self._fail(scope, decl, "Mth-Ok", f"{decl.name} may end without returning a {decl.ret}")
        return True

    def check_residual(self, this_type, method, stmts, gamma, theta=None, this_ids=None):
        """Type a runtime continuation: used to test preservation."""
        decl = self.r.lookup_method(this_type, method)[1]
        this_ids = this_ids or frozenset({self.fresh_ident(this_type)})
        th = self.theta_init(this_type)
        for k, v in (theta or {}).items():
            th[k] = v
        for name, t in gamma.items():
            if isinstance(t, A.ContractType) and ("v", name) not in th:
                th[("v", name)] = frozenset({Top(t.name)})
        body = A.seq(stmts)
        sigma = locs(self.r, this_ids, body, this_type)
        scope = _Scope(this_ids, this_type, method, decl.ret, (f"{this_type}.{method}",))
        return self.check_stmt(Context(dict(gamma), frozenset(), th, sigma), scope, body)

    # -- statements

    def _fail(self, scope, node, rule, message, conflict=None):
        raise Rejection(Failure(scope.this_type, scope.method, getattr(node, "loc", None), rule, message,
                                conflict, scope.trail))

    def _type(self, ctx, scope, e, node, rule):
        try:
            return type_of(self.r, ctx.gamma, e, scope.this_type)
        except TypeMismatch as exc:
            self._fail(scope, node, rule, str(exc))

    def _locs(self, scope, p):
        return locs(self.r, scope.this_ids, p, scope.this_type)

    def _alias(self, ctx, scope, e, t):
        """Alias set of a contract-valued expression ``e`` of static type ``t``."""
        if isinstance(e, A.This):
            return scope.this_ids
        if isinstance(e, A.Var) and ("v", e.name) in ctx.theta:
            return ctx.theta[("v", e.name)]
        if isinstance(e, A.Field) and ("f", e.name) in ctx.theta:
            return ctx.theta[("f", e.name)]
        if isinstance(t, A.ContractType):
            return frozenset({Top(t.name)})
        return None

    def _bind_theta(self, ctx, scope, key, t, rhs):
        if not isinstance(t, A.ContractType):
            return ctx.theta
        theta = dict(ctx.theta)
        if isinstance(rhs, (A.This, A.Var, A.Field)):
            ids = self._alias(ctx, scope, rhs, t)
        else:
            ids = None
        theta[key] = ids if ids else frozenset({Top(t.name)})
        return theta

    def check_stmt(self, ctx: Context, scope: _Scope, s, node=None) -> Context:
        if isinstance(s, A.Skip):
            return ctx
        if isinstance(s, A.Seq):
            sub = Derivation("Succ", _short(s)) if node is not None else None
            if sub is not None:
                node.children.append(sub)
            for st in A.flatten(s):
                ctx = self.check_stmt(ctx, scope, st, sub)
            return ctx
        child = None
        if node is not None:
            child = Derivation(self._rule_name(s), _short(s))
            node.children.append(child)
        try:
            return self._check(ctx, scope, s, child)
        except Rejection:
            if child is not None:
                child.ok = False
            raise

    @staticmethod
    def _rule_name(s):
        return {A.Assign: "Assign", A.Let: "Let", A.If: "If-Else", A.While: "While", A.Assert: "Assert",
                A.Return: "Return", A.Throw: "Throw", A.Try: "Try-Abort", A.Call: "Call",
                A.CallAssign: "Call"}.get(type(s), type(s).__name__)

    def _check(self, ctx, scope, s, node):
        out_sigma = msub(ctx.sigma, self._locs(scope, s))
        if isinstance(s, A.Assign):
            tt = self._type(ctx, scope, s.target, s, "Assign")
            rt = self._type(ctx, scope, s.rhs, s, "Assign")
            if not self.r.subtype(rt, tt):
                self._fail(scope, s, "Assign", f"cannot assign {rt} to {show_expr(s.target)} of type {tt}")
            key = ("v", s.target.name) if isinstance(s.target, A.Var) else ("f", s.target.name)
            theta = self._bind_theta(ctx, scope, key, tt, s.rhs)
            return ctx.with_(theta=theta, sigma=out_sigma)
        if isinstance(s, A.Let):
            rt = self._type(ctx, scope, s.rhs, s, "Let")
            t = s.decl_type or rt
            if not self.r.subtype(rt, t):
                self._fail(scope, s, "Let", f"cannot bind {rt} to {s.var} of type {t}")
            inner = ctx.with_(gamma={**ctx.gamma, s.var: t},
                              theta=self._bind_theta(ctx, scope, ("v", s.var), t, s.rhs),
                              sigma=msub(ctx.sigma, self._locs(scope, s.rhs)))
            body = self.check_stmt(inner, scope, s.body, node)
            return body.with_(sigma=out_sigma)
        if isinstance(s, A.If):
            if self._type(ctx, scope, s.cond, s, "If-Else") != A.BOOL:
                self._fail(scope, s, "If-Else", "condition must be bool")
            base = msub(ctx.sigma, self._locs(scope, s.cond))
            orelse = s.orelse or A.Skip()
            c1 = self.check_stmt(ctx.with_(sigma=msub(base, self._locs(scope, orelse))), scope, s.then, node)
            c2 = self.check_stmt(ctx.with_(sigma=msub(base, self._locs(scope, s.then))), scope, orelse, node)
            return self._join(c1, c2).with_(sigma=out_sigma)
        if isinstance(s, A.While):
            if self._type(ctx, scope, s.cond, s, "While") != A.BOOL:
                self._fail(scope, s, "While", "condition must be bool")
            loop_sigma = madd(ctx.sigma, self._locs(scope, s))
            cur = ctx
            for _ in range(1000):
                body_in = cur.with_(sigma=msub(loop_sigma, self._locs(scope, s.cond)))
                out = self.check_stmt(body_in, scope, s.body, None)
                nxt = self._join(cur, out)
                if nxt.gamma == cur.gamma and nxt.delta == cur.delta and nxt.theta == cur.theta:
                    break
                cur = nxt
            else:  # pragma: no cover - the join lattice is finite
                self._fail(scope, s, "While", "no fixpoint")
            if node is not None:
                self.check_stmt(cur.with_(sigma=msub(loop_sigma, self._locs(scope, s.cond))), scope, s.body, node)
            return cur.with_(sigma=out_sigma)
        if isinstance(s, A.Assert):
            if self._type(ctx, scope, s.cond, s, "Assert") != A.BOOL:
                self._fail(scope, s, "Assert", "assert needs a bool")
            return ctx.with_(sigma=out_sigma)
        if isinstance(s, A.Return):
            if s.value is None:
                if scope.ret != A.UNIT:
                    self._fail(scope, s, "Return", f"{scope.method} must return a {scope.ret}")
            else:
                t = self._type(ctx, scope, s.value, s, "Return")
                if not self.r.subtype(t, scope.ret):
                    self._fail(scope, s, "Return", f"returns {t}, declared {scope.ret}")
            return ctx.with_(sigma=out_sigma)
        if isinstance(s, A.Throw):
            if self._type(ctx, scope, s.value, s, "Throw") != A.STRING:
                self._fail(scope, s, "Throw", "throw needs a string")
            return ctx.with_(sigma=out_sigma)
        if isinstance(s, (A.Call, A.CallAssign)):
            return self._call(ctx, scope, s, ctx.sigma, node).with_(sigma=out_sigma)
        if isinstance(s, A.Try):
            c0 = self._call(ctx, scope, s.call, msub(ctx.sigma, self._locs(scope, s.call)), node,
                            own=Counter())
            after_call = msub(ctx.sigma, self._locs(scope, s.call))
            g_abort = dict(c0.gamma)
            if s.abort_var is not None:
                g_abort[s.abort_var] = A.STRING
            c1 = self.check_stmt(c0.with_(gamma=g_abort, sigma=msub(after_call, self._locs(scope, s.success))),
                                 scope, s.abort, node)
            c2 = self.check_stmt(c0.with_(sigma=msub(after_call, self._locs(scope, s.abort))),
                                 scope, s.success, node)
            return self._join(self._join(c0, c1), c2).with_(sigma=out_sigma)
        self._fail(scope, s, "Stmt", f"unexpected {type(s).__name__}")

    def _join(self, a: Context, b: Context) -> Context:
        gamma = {**a.gamma, **b.gamma}
        theta = dict(a.theta)
        for k, v in b.theta.items():
            theta[k] = theta[k] | v if k in theta else v
        return Context(gamma, a.delta | b.delta, theta, a.sigma & b.sigma)

    # -- calls

    def implementations(self, ctx, scope, recv, m, nargs):
        """``(alias set, [(runtime type, decl)])`` for a call of ``m`` on ``recv``."""
        rt = type_of(self.r, ctx.gamma, recv, scope.this_type)
        if isinstance(rt, A.ContractType):
            ids = self._alias(ctx, scope, recv, rt)
            types = [rt.name]
        elif rt == A.ADDRESS:
            types = [c for c in self.r.declaring_contracts(m)
                     if len(self.r.lookup_method(c, m)[1].params) == nargs]
            types = [c for c in types if not any(p != c and p in types for p in self.r.ancestors(c))]
            ids = frozenset(Top(c) for c in types)
        else:
            raise TypeMismatch(f"cannot call {m} on a value of type {rt}")
        impls = []
        seen = set()
        for atom in sorted(ids, key=str):
            for sub in self.r.subcontracts(atom_type(atom)):
                if isinstance(atom, Ident) and sub != atom.contract:
                    continue
                found = self.r.lookup_method(sub, m)
                if found is None or sub in seen:
                    continue
                seen.add(sub)
                impls.append((sub, found[1]))
        return ids, impls

    def _call(self, ctx, scope, s, sigma_at_call, node, own=None):
        """Call-Safe, falling back to Call.  ``sigma_at_call`` is the pending
        multiset at the call including the call's own accesses unless ``own``
        says otherwise."""
        try:
            ids, impls = self.implementations(ctx, scope, s.receiver, s.method, len(s.args))
        except TypeMismatch as exc:
            self._fail(scope, s, "Call", str(exc))
        if not ids or not impls:
            self._fail(scope, s, "Call", f"no implementation of {s.method} for {show_expr(s.receiver)}")
        for cname, decl in impls:
            params = [p.type for p in decl.params]
            try:
                _check_args(self.r, ctx.gamma, s.args, params, scope.this_type, f"{cname}.{s.method}")
                if s.value is not None and type_of(self.r, ctx.gamma, s.value, scope.this_type) != A.INT:
                    raise TypeMismatch("transferred value must be int")
                if isinstance(s, A.CallAssign):
                    tt = type_of(self.r, ctx.gamma, s.target, scope.this_type)
                    if not self.r.subtype(decl.ret, tt):
                        raise TypeMismatch(f"{cname}.{s.method} returns {decl.ret}, target is {tt}")
            except TypeMismatch as exc:
                self._fail(scope, s, "Call", str(exc))

        own_locs = self._locs(scope, s) if own is None else own
        pending = msub(sigma_at_call, own_locs)
        lock = self._locked(ctx.delta, ids, s.method)
        desc = f"⟨Θ({show_expr(s.receiver)}) = {show_ids(ids)}, {s.method}⟩"

        safe_reason = None
        if self.all_irrelevant(pending):
            safe_reason = "no relevant access pending"
        elif ids == scope.this_ids and all(
                self.all_irrelevant(locs(self.r, ids, d.body, c)) for c, d in impls):
            safe_reason = "callee touches only irrelevant fields"

        sub = Derivation("Call-Safe" if safe_reason and lock is None else "Call", desc) if node is not None else None
        if lock is not None:
            if node is not None:
                node.rule = "Call"
                node.ok = False
            self._fail(scope, s, "Call", f"{desc} ∩ Δ ≠ ∅: {s.method} is locked by ⟨{show_ids(lock[0])}, {lock[1]}⟩",
                       conflict=((ids, s.method), lock))

        if safe_reason is not None:
            try:
                self._check_callees(ids, impls, s.method, ctx.delta, scope, sub)
                if node is not None:
                    node.rule = "Call-Safe"
                    node.text += f"  ({safe_reason})"
                    if sub is not None:
                        node.children.extend(sub.children)
                return ctx.with_(theta=self._after_call(ctx, scope, s))
            except Rejection:
                pass
            sub = Derivation("Call", desc) if node is not None else None
        locked = ctx.delta | {(scope.this_ids, scope.method)}
        self._check_callees(ids, impls, s.method, locked, scope, sub)
        if node is not None:
            node.rule = "Call"
            node.children.extend(sub.children)
        return ctx.with_(delta=ctx.delta | {(ids, s.method)}, theta=self._after_call(ctx, scope, s))

    def _after_call(self, ctx, scope, s):
        theta = self._reset_fields(ctx.theta, scope.this_type)
        if isinstance(s, A.CallAssign):
            tt = type_of(self.r, ctx.gamma, s.target, scope.this_type)
            if isinstance(tt, A.ContractType):
                key = ("v", s.target.name) if isinstance(s.target, A.Var) else ("f", s.target.name)
                theta[key] = frozenset({Top(tt.name)})
        return theta

    def _locked(self, delta, ids, m):
        for lids, lm in sorted(delta, key=lambda x: (x[1], show_ids(x[0]))):
            if lm == m and self.intersects(lids, ids):
                return (lids, lm)
        return None

    def _check_callees(self, ids, impls, m, delta, scope, node):
        for cname, decl in impls:
            callee_ids = frozenset(
                (a if isinstance(a, Ident) else Top(cname)) for a in ids
                if (isinstance(a, Ident) and a.contract == cname)
                or (isinstance(a, Top) and self.r.is_subcontract(cname, a.contract)))
            key = (cname, m, callee_ids, frozenset(delta))
            if key in self._memo:
                failure = self._memo[key]
                if failure is not None:
                    raise Rejection(failure)
                continue
            if any(k[:3] == key[:3] and k[3] >= key[3] for k in self._progress):
                continue  # coinductive hypothesis
            child = Derivation("Mth-Ok", f"{cname}.{m} under Δ = {self._show_delta(delta)}") if node is not None else None
            if node is not None:
                node.children.append(child)
            self._progress.append(key)
            try:
                self.check_method(callee_ids, cname, decl, delta, scope.trail, child)
            except Rejection as rej:
                self._memo[key] = rej.failure
                if child is not None:
                    child.ok = False
                raise
            finally:
                self._progress.pop()
            if not self._progress:
                self._memo[key] = None

    @staticmethod
    def _show_delta(delta):
        return "{" + ", ".join(f"⟨{show_ids(i)}, {m}⟩" for i, m in sorted(delta, key=lambda x: (x[1], show_ids(x[0])))) + "}"


def definitely_returns(s) -> bool:
    stmts = A.flatten(s)
    if not stmts:
        return False
    last = stmts[-1]
    if any(isinstance(x, (A.Return, A.Throw)) for x in stmts):
        return True
    if isinstance(last, A.If):
        return last.orelse is not None and definitely_returns(last.then) and definitely_returns(last.orelse)
    if isinstance(last, A.Let):
        return definitely_returns(last.body)
    if isinstance(last, A.Try):
        return definitely_returns(last.abort) and definitely_returns(last.success)
    return False


def check_program(program: Resolved, explain=False):
    """``{contract name: CheckReport}`` for every contract of ``program``."""
    checker = Checker(program, explain)
    return {c: checker.check_contract(c) for c in program.contracts}


def check_contract(program: Resolved, c, explain=False) -> CheckReport:
    return Checker(program, explain).check_contract(c)
