"""Name resolution.

Turns a parsed :class:`~smartml.ast.Program` into a :class:`Resolved`
program: type names bound to ADTs or contracts, bare field names rewritten
to ``this.f``, ``recv.fn(...)`` on ADT values turned into ADT calls, locals
alpha-renamed so every binder in a method is unique, and arities checked.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import ast as A

BALANCE = "balance"
BUILTIN_BALANCE = A.FieldDecl(A.INT, BALANCE, False)


class NameResolutionError(Exception):
    def __init__(self, kind, message, loc=None):
        self.kind = kind  # unknown | duplicate | cycle | arity | misuse
        self.message = message
        self.loc = loc
        where = f"{loc[0]}:{loc[1]}: " if loc else ""
        super().__init__(f"{where}{kind}: {message}")


@dataclass
class Resolved:
    program: A.Program
    contracts: dict = field(default_factory=dict)
    adts: dict = field(default_factory=dict)
    # (contract, method) -> {internal local name: type}
    locals: dict = field(default_factory=dict)

    # -- inheritance

    def ancestors(self, c: str) -> list:
        """``c`` followed by its transitive parents."""
        out = []
        while c is not None:
            out.append(c)
            c = self.contracts[c].parent
        return out

    def is_subcontract(self, c: str, d: str) -> bool:
        return d in self.ancestors(c)

    def subcontracts(self, c: str) -> list:
        return [name for name in self.contracts if self.is_subcontract(name, c)]

    def subtype(self, t1: A.Type, t2: A.Type) -> bool:
        if t1 == t2:
            return True
        if isinstance(t1, A.ContractType):
            if isinstance(t2, A.ContractType):
                return self.is_subcontract(t1.name, t2.name)
            return t2 == A.ADDRESS
        return False

    # -- lookups

    def fields(self, c: str) -> list:
        """Inherited fields first, then own ones; the built-in balance last
        unless some contract in the chain declares it."""
        out = []
        for name in reversed(self.ancestors(c)):
            out.extend(self.contracts[name].fields)
        if all(f.name != BALANCE for f in out):
            out.append(BUILTIN_BALANCE)
        return out

    def field(self, c: str, name: str):
        for f in self.fields(c):
            if f.name == name:
                return f
        return None

    def is_irrelevant(self, c: str, name: str) -> bool:
        f = self.field(c, name)
        return f is not None and f.irrelevant

    def lookup_method(self, c: str, m: str):
        """``(owner, MethodDecl)`` for the implementation ``c`` runs for ``m``."""
        for name in self.ancestors(c):
            decl = self.contracts[name].method(m)
            if decl is not None:
                return name, decl
        return None

    def mtype(self, c: str, m: str):
        found = self.lookup_method(c, m)
        if found is None:
            return None
        decl = found[1]
        return tuple(p.type for p in decl.params), decl.ret

    def mbody(self, c: str, m: str):
        found = self.lookup_method(c, m)
        return None if found is None else found[1].body

    def implementations(self, c: str, m: str) -> list:
        """Every distinct implementation of ``m`` a receiver of static type
        ``c`` may dispatch to, as ``(runtime type, owner, decl)``."""
        out, seen = [], set()
        for sub in self.subcontracts(c):
            found = self.lookup_method(sub, m)
            if found is not None and (found[0], m) not in seen:
                seen.add((found[0], m))
                out.append((sub, found[0], found[1]))
        return out

    def declaring_contracts(self, m: str) -> list:
        return [c for c in self.contracts if self.lookup_method(c, m) is not None]

    def constructor_params(self, c: str) -> tuple:
        k = self.contracts[c].constructor
        return () if k is None else k.params

    def ctor_adt(self, ctor: str):
        for a in self.adts.values():
            if a.ctor(ctor) is not None:
                return a
        return None


class _Resolver:
    def __init__(self, program: A.Program):
        self.src = program
        self.r = Resolved(program)

    # -- helpers

    def fail(self, kind, message, node=None):
        raise NameResolutionError(kind, message, getattr(node, "loc", None))

    def type_(self, t, node=None) -> A.Type:
        if isinstance(t, A.NamedType):
            if t.name in self.r.adts:
                return A.AdtType(t.name)
            if t.name in self.r.contracts:
                return A.ContractType(t.name)
            self.fail("unknown", f"unknown type {t.name}", node)
        return t

    # -- program level

    def run(self) -> Resolved:
        names = set()
        for d in list(self.src.adts) + list(self.src.contracts):
            if d.name in names:
                self.fail("duplicate", f"duplicate declaration {d.name}", d)
            names.add(d.name)
        # provisional tables so type names resolve while bodies are rewritten
        self.r.adts = {a.name: a for a in self.src.adts}
        self.r.contracts = {c.name: c for c in self.src.contracts}
        for c in self.src.contracts:
            self.check_ancestry(c)
        adts = {a.name: self.adt_signature(a) for a in self.src.adts}
        self.r.adts = adts
        contracts = {c.name: self.contract_signature(c) for c in self.src.contracts}
        self.r.contracts = contracts
        for c in contracts.values():
            self.check_fields(c)
        self.r.adts = {name: self.adt_bodies(a) for name, a in adts.items()}
        resolved = {}
        for name, c in contracts.items():
            resolved[name] = self.contract_bodies(c)
        self.r.contracts = resolved
        self.r.program = A.Program(tuple(self.r.adts.values()), tuple(resolved.values()), loc=self.src.loc)
        return self.r

    def check_ancestry(self, c):
        seen = [c.name]
        cur = c
        while cur.parent is not None:
            if cur.parent not in self.r.contracts:
                self.fail("unknown", f"{cur.name} extends unknown contract {cur.parent}", cur)
            if cur.parent in seen:
                self.fail("cycle", f"cyclic inheritance through {cur.parent}", c)
            seen.append(cur.parent)
            cur = self.r.contracts[cur.parent]

    def params(self, params):
        names = set()
        out = []
        for p in params:
            if p.name in names:
                self.fail("duplicate", f"duplicate parameter {p.name}", p)
            names.add(p.name)
            out.append(A.Param(self.type_(p.type, p), p.name, loc=p.loc))
        return tuple(out)

    def adt_signature(self, a):
        ctors, fns = [], []
        seen = set()
        for k in a.ctors:
            if k.name in seen:
                self.fail("duplicate", f"duplicate constructor {k.name} in {a.name}", k)
            seen.add(k.name)
            ctors.append(A.Ctor(k.name, self.params(k.params), loc=k.loc))
        seen = set()
        for f in a.functions:
            if f.name in seen:
                self.fail("duplicate", f"duplicate function {f.name} in {a.name}", f)
            seen.add(f.name)
            fns.append(A.AdtFunction(self.type_(f.ret, f), f.name, self.params(f.params), f.body, loc=f.loc))
        return A.AdtDecl(a.name, tuple(ctors), tuple(fns), loc=a.loc)

    def contract_signature(self, c):
        fields = []
        for f in c.fields:
            fields.append(A.FieldDecl(self.type_(f.type, f), f.name, f.irrelevant, loc=f.loc))
        methods = []
        seen = set()
        for m in c.methods:
            if m.name in seen:
                self.fail("duplicate", f"duplicate method {c.name}.{m.name}", m)
            seen.add(m.name)
            methods.append(A.MethodDecl(self.type_(m.ret, m), m.name, self.params(m.params), m.body, loc=m.loc))
        k = c.constructor
        if k is not None:
            k = A.ConstructorDecl(self.params(k.params), k.super_args, k.inits, loc=k.loc)
        return A.ContractDecl(c.name, c.parent, tuple(fields), k, tuple(methods), loc=c.loc)

    def check_fields(self, c):
        seen = {}
        for name in reversed(self.r.ancestors(c.name)):
            for f in self.r.contracts[name].fields:
                if f.name in seen:
                    self.fail("duplicate", f"field {f.name} declared twice in the hierarchy of {c.name}", f)
                if f.name == BALANCE and f.type != A.INT:
                    self.fail("misuse", "the built-in balance field must have type int", f)
                seen[f.name] = f
        if c.parent is not None:
            for m in c.methods:
                inherited = self.r.lookup_method(c.parent, m.name)
                if inherited is not None:
                    pm = inherited[1]
                    if [p.type for p in pm.params] != [p.type for p in m.params] or pm.ret != m.ret:
                        self.fail("arity", f"{c.name}.{m.name} overrides with a different signature", m)

    # -- ADT bodies

    def adt_bodies(self, a):
        fns = []
        for f in a.functions:
            scope = {p.name: p.type for p in f.params}
            fns.append(A.AdtFunction(f.ret, f.name, f.params, self.dexpr(f.body, scope, a), loc=f.loc))
        return A.AdtDecl(a.name, a.ctors, tuple(fns), loc=a.loc)

    def dexpr(self, d, scope, adt):
        ctx = _ExprCtx(self, scope, None, adt)
        if isinstance(d, A.DReturn):
            return A.DReturn(ctx.expr(d.value), loc=d.loc)
        if isinstance(d, A.DIf):
            return A.DIf(ctx.expr(d.cond), self.dexpr(d.then, scope, adt), self.dexpr(d.orelse, scope, adt), loc=d.loc)
        if isinstance(d, A.DLet):
            ty = self.type_(d.decl_type, d)
            value = ctx.expr(d.value)
            return A.DLet(d.var, ty, value, self.dexpr(d.body, {**scope, d.var: ty}, adt), loc=d.loc)
        if isinstance(d, A.DSwitch):
            scrut = ctx.expr(d.scrutinee)
            cases = []
            for case in d.cases:
                inner = dict(scope)
                if case.ctor is not None:
                    owner = self.r.adts.get(getattr(ctx.infer(scrut), "name", None))
                    if owner is None or owner.ctor(case.ctor) is None:
                        owner = self.r.ctor_adt(case.ctor)
                    if owner is None:
                        self.fail("unknown", f"unknown constructor {case.ctor}", case)
                    k = owner.ctor(case.ctor)
                    if case.binders and len(case.binders) != len(k.params):
                        self.fail("arity", f"pattern {case.ctor} binds {len(case.binders)} of {len(k.params)} arguments", case)
                    for b, p in zip(case.binders, k.params):
                        inner[b] = p.type
                    cases.append(A.Case(case.ctor, case.binders, None, self.dexpr(case.body, inner, adt), loc=case.loc))
                else:
                    cases.append(A.Case(None, (), case.literal, self.dexpr(case.body, inner, adt), loc=case.loc))
            default = None if d.default is None else self.dexpr(d.default, scope, adt)
            return A.DSwitch(scrut, tuple(cases), default, loc=d.loc)
        raise TypeError(d)

    # -- contracts

    def contract_bodies(self, c):
        k = c.constructor
        if k is not None:
            k = self.constructor(c, k)
        elif c.parent is not None and self.r.constructor_params(c.parent):
            self.fail("arity", f"{c.name} needs a constructor to initialise {c.parent}", c)
        methods = []
        for m in c.methods:
            methods.append(self.method(c, m))
        return A.ContractDecl(c.name, c.parent, c.fields, k, tuple(methods), loc=c.loc)

    def constructor(self, c, k):
        scope = {p.name: p.type for p in k.params}
        ctx = _ExprCtx(self, scope, c.name, None)
        super_args = None
        if c.parent is not None:
            expected = len(self.r.constructor_params(c.parent))
            given = k.super_args or ()
            if len(given) != expected:
                self.fail("arity", f"super call of {c.name} passes {len(given)} of {expected} arguments", k)
            super_args = tuple(ctx.expr(e) for e in given)
        elif k.super_args is not None:
            self.fail("misuse", f"{c.name} has no parent to call super on", k)
        inits = []
        seen = set()
        for name, rhs in k.inits:
            if self.r.field(c.name, name) is None:
                self.fail("unknown", f"{c.name} has no field {name}", k)
            if name in seen:
                self.fail("duplicate", f"field {name} initialised twice", k)
            seen.add(name)
            inits.append((name, ctx.expr(rhs, allow_new=True)))
        return A.ConstructorDecl(k.params, super_args, tuple(inits), loc=k.loc)

    def method(self, c, m):
        table = {p.name: p.type for p in m.params}
        scope = {p.name: (p.name, p.type) for p in m.params}
        body = _BodyResolver(self, c.name, table).stmt(m.body, scope)
        self.r.locals[(c.name, m.name)] = table
        return A.MethodDecl(m.ret, m.name, m.params, body, loc=m.loc)


class _ExprCtx:
    """Expression resolution within one scope.

    ``scope`` maps source names either to a type (ADT bodies, constructors)
    or to ``(internal name, type)`` (method bodies).
    """

    def __init__(self, res: _Resolver, scope, contract, adt):
        self.res = res
        self.r = res.r
        self.scope = scope
        self.contract = contract
        self.adt = adt

    def local(self, name):
        entry = self.scope.get(name)
        if entry is None:
            return None
        if isinstance(entry, tuple):
            return entry
        return name, entry

    def infer(self, e):
        if isinstance(e, A.IntLit) or isinstance(e, (A.Amount, A.BinOp)):
            return A.INT
        if isinstance(e, (A.BoolLit, A.Not, A.BoolOp)):
            return A.BOOL
        if isinstance(e, A.StrLit):
            return A.STRING
        if isinstance(e, A.Sender):
            return A.ADDRESS
        if isinstance(e, A.This):
            return A.ContractType(self.contract) if self.contract else None
        if isinstance(e, A.Var):
            for entry in self.scope.values():
                if isinstance(entry, tuple) and entry[0] == e.name:
                    return entry[1]
            entry = self.scope.get(e.name)
            return entry if isinstance(entry, A.Type) else None
        if isinstance(e, A.Field):
            f = self.r.field(self.contract, e.name) if self.contract else None
            return f.type if f else None
        if isinstance(e, A.New):
            return A.ContractType(e.contract)
        if isinstance(e, A.AdtCall):
            return self.r.adts[e.adt].function(e.fn).ret
        if isinstance(e, A.AdtCons):
            return A.AdtType(e.adt)
        if isinstance(e, A.Proj):
            t = self.infer(e.target)
            if isinstance(t, A.AdtType):
                for k in self.r.adts[t.name].ctors:
                    for p in k.params:
                        if p.name == e.name:
                            return p.type
        return None

    def expr(self, e, allow_new=False):
        fail = self.res.fail
        if isinstance(e, (A.IntLit, A.BoolLit, A.StrLit, A.Sender, A.Amount)):
            return e
        if isinstance(e, A.This):
            if self.contract is None:
                fail("misuse", "this outside a contract", e)
            return e
        if isinstance(e, A.Var):
            found = self.local(e.name)
            if found is not None:
                return A.Var(found[0], loc=e.loc)
            if self.contract is not None and self.r.field(self.contract, e.name) is not None:
                return A.Field(e.name, loc=e.loc)
            adt = self.ctor_owner(e.name)
            if adt is not None:
                if adt.ctor(e.name).params:
                    fail("arity", f"constructor {e.name} needs arguments", e)
                return A.AdtCons(adt.name, e.name, (), loc=e.loc)
            fail("unknown", f"unknown name {e.name}", e)
        if isinstance(e, A.Field):
            if self.contract is None or self.r.field(self.contract, e.name) is None:
                fail("unknown", f"unknown field {e.name}", e)
            return e
        if isinstance(e, A.Not):
            return A.Not(self.expr(e.operand), loc=e.loc)
        if isinstance(e, A.BinOp):
            return A.BinOp(e.op, self.expr(e.left), self.expr(e.right), loc=e.loc)
        if isinstance(e, A.BoolOp):
            return A.BoolOp(e.op, self.expr(e.left), self.expr(e.right), loc=e.loc)
        if isinstance(e, A.New):
            if not allow_new:
                fail("misuse", "new is only allowed as a right-hand side", e)
            if e.contract not in self.r.contracts:
                fail("unknown", f"unknown contract {e.contract}", e)
            expected = len(self.r.constructor_params(e.contract))
            if len(e.args) != expected:
                fail("arity", f"new {e.contract} takes {expected} arguments", e)
            return A.New(e.contract, tuple(self.expr(a) for a in e.args), loc=e.loc)
        if isinstance(e, A.Proj):
            return A.Proj(self.expr(e.target), e.name, loc=e.loc)
        if isinstance(e, A.Apply):
            return self.apply(e)
        if isinstance(e, A.DotCall):
            if e.value is not None:
                fail("misuse", "value transfer outside a call statement", e)
            recv = self.expr(e.receiver)
            t = self.infer(recv)
            if not isinstance(t, A.AdtType):
                fail("misuse", f"method call {e.name} on a non-ADT value inside an expression", e)
            return self.adt_method(t.name, recv, e.name, tuple(self.expr(a) for a in e.args), e)
        if isinstance(e, (A.AdtCall, A.AdtCons)):
            return e
        raise TypeError(e)

    def ctor_owner(self, name):
        if self.adt is not None and self.adt.ctor(name) is not None:
            return self.r.adts[self.adt.name]
        owners = [a for a in self.r.adts.values() if a.ctor(name) is not None]
        if len(owners) > 1:
            self.res.fail("duplicate", f"constructor {name} is ambiguous", None)
        return owners[0] if owners else None

    def apply(self, e):
        args = tuple(self.expr(a) for a in e.args)
        adt = self.ctor_owner(e.name)
        if adt is not None:
            k = adt.ctor(e.name)
            if len(k.params) != len(args):
                self.res.fail("arity", f"constructor {e.name} takes {len(k.params)} arguments", e)
            return A.AdtCons(adt.name, e.name, args, loc=e.loc)
        if self.adt is not None and self.r.adts[self.adt.name].function(e.name) is not None:
            owners = [self.r.adts[self.adt.name]]
        else:
            owners = [a for a in self.r.adts.values() if a.function(e.name) is not None]
            if len(owners) > 1 and args:
                t = self.infer(args[0])
                owners = [a for a in owners if isinstance(t, A.AdtType) and a.name == t.name] or owners
        if not owners:
            self.res.fail("unknown", f"unknown function {e.name}", e)
        if len(owners) > 1:
            self.res.fail("duplicate", f"function {e.name} is ambiguous", e)
        fn = owners[0].function(e.name)
        if len(fn.params) != len(args):
            self.res.fail("arity", f"{owners[0].name}.{e.name} takes {len(fn.params)} arguments", e)
        return A.AdtCall(owners[0].name, e.name, args, loc=e.loc)

    def adt_method(self, adt_name, recv, name, args, node):
        fn = self.r.adts[adt_name].function(name)
        if fn is None:
            self.res.fail("unknown", f"{adt_name} has no function {name}", node)
        if len(args) == len(fn.params):
            full = args
        elif len(args) + 1 == len(fn.params):
            full = (recv,) + args
        else:
            self.res.fail("arity", f"{adt_name}.{name} takes {len(fn.params)} arguments", node)
        return A.AdtCall(adt_name, name, full, loc=node.loc)


class _BodyResolver:
    def __init__(self, res: _Resolver, contract: str, table: dict):
        self.res = res
        self.r = res.r
        self.contract = contract
        self.table = table  # internal local name -> type, shared by the whole method

    def fresh(self, name):
        if name not in self.table:
            return name
        k = 1
        while f"{name}#{k}" in self.table:
            k += 1
        return f"{name}#{k}"

    def ctx(self, scope):
        return _ExprCtx(self.res, scope, self.contract, None)

    def target(self, t, scope):
        ctx = self.ctx(scope)
        if isinstance(t, A.Var):
            found = ctx.local(t.name)
            if found is not None:
                return A.Var(found[0], loc=t.loc)
            if self.r.field(self.contract, t.name) is not None:
                return A.Field(t.name, loc=t.loc)
            self.res.fail("unknown", f"unknown variable {t.name}", t)
        return ctx.expr(t)

    def stmt(self, s, scope):
        fail = self.res.fail
        ctx = self.ctx(scope)
        if isinstance(s, A.Skip):
            return s
        if isinstance(s, A.Seq):
            return A.Seq(self.stmt(s.first, scope), self.stmt(s.rest, scope), loc=s.loc)
        if isinstance(s, A.If):
            orelse = None if s.orelse is None else self.stmt(s.orelse, scope)
            return A.If(ctx.expr(s.cond), self.stmt(s.then, scope), orelse, loc=s.loc)
        if isinstance(s, A.While):
            return A.While(ctx.expr(s.cond), self.stmt(s.body, scope), loc=s.loc)
        if isinstance(s, A.Let):
            rhs = ctx.expr(s.rhs, allow_new=True)
            ty = self.res.type_(s.decl_type, s) if s.decl_type is not None else ctx.infer(rhs)
            if ty is None:
                fail("unknown", f"cannot determine the type of {s.var}", s)
            name = self.fresh(s.var)
            self.table[name] = ty
            body = self.stmt(s.body, {**scope, s.var: (name, ty)})
            return A.Let(name, rhs, body, ty if s.decl_type is not None else None, loc=s.loc)
        if isinstance(s, A.Assert):
            return A.Assert(ctx.expr(s.cond), loc=s.loc)
        if isinstance(s, A.Return):
            return A.Return(None if s.value is None else ctx.expr(s.value), loc=s.loc)
        if isinstance(s, A.Throw):
            return A.Throw(ctx.expr(s.value), loc=s.loc)
        if isinstance(s, A.Assign):
            return A.Assign(self.target(s.target, scope), ctx.expr(s.rhs, allow_new=True), loc=s.loc)
        if isinstance(s, (A.Call, A.CallAssign)):
            return self.call(s, scope)
        if isinstance(s, A.Try):
            call = self.call(s.call, scope)
            if not isinstance(call, (A.Call, A.CallAssign)):
                fail("misuse", "try body must invoke a contract method", s)
            abort_scope = scope
            var = s.abort_var
            if var is not None:
                var = self.fresh(s.abort_var)
                self.table[var] = A.STRING
                abort_scope = {**scope, s.abort_var: (var, A.STRING)}
            return A.Try(call, var, self.stmt(s.abort, abort_scope), self.stmt(s.success, scope), loc=s.loc)
        raise TypeError(s)

    def call(self, s, scope):
        fail = self.res.fail
        ctx = self.ctx(scope)
        recv = ctx.expr(s.receiver)
        rtype = ctx.infer(recv)
        args = tuple(ctx.expr(a) for a in s.args)
        if isinstance(rtype, A.AdtType):
            if s.value is not None:
                fail("misuse", "value transfer to an ADT value", s)
            call = ctx.adt_method(rtype.name, recv, s.method, args, s)
            if isinstance(s, A.CallAssign):
                return A.Assign(self.target(s.target, scope), call, loc=s.loc)
            if not isinstance(recv, (A.Var, A.Field)):
                fail("misuse", f"result of {s.method} is discarded", s)
            if ctx.infer(call) != rtype:
                fail("misuse", f"{rtype.name}.{s.method} does not return {rtype.name}", s)
            return A.Assign(recv, call, loc=s.loc)
        value = None if s.value is None else ctx.expr(s.value)
        if isinstance(rtype, A.ContractType):
            candidates = [rtype.name]
        elif rtype == A.ADDRESS:
            candidates = self.r.declaring_contracts(s.method)
        else:
            fail("misuse", f"cannot call {s.method} on a value of type {rtype}", s)
        if not candidates or any(self.r.lookup_method(c, s.method) is None for c in candidates):
            fail("unknown", f"no contract method {s.method} for receiver of type {rtype}", s)
        arities = {len(self.r.lookup_method(c, s.method)[1].params) for c in candidates}
        if len(args) not in arities:
            fail("arity", f"{s.method} takes {sorted(arities)} arguments, {len(args)} given", s)
        if isinstance(s, A.CallAssign):
            return A.CallAssign(self.target(s.target, scope), recv, s.method, args, value, loc=s.loc)
        return A.Call(recv, s.method, args, value, loc=s.loc)


def resolve(program: A.Program) -> Resolved:
    """Resolve names in ``program``; raises :class:`NameResolutionError`."""
    return _Resolver(program).run()


def load(source: str) -> Resolved:
    from .parser import parse_program
    return resolve(parse_program(source))
