"""Small-step interpreter.

``Machine.step`` advances a :class:`~smartml.runtime.Configuration` by one
rule.  Calls on ``this`` push a plain frame; every other call opens a
transaction: the permanent memory is snapshotted onto the rollback list and
the caller's frame keeps a ``try ?; abort ...; success ...`` continuation.
A bare external call gets an abort branch that rethrows.
"""
from __future__ import annotations

from dataclasses import dataclass
from . import ast as A
from .resolve import BALANCE, Resolved
from .runtime import (AMOUNT, ORIGIN, ORIGIN_ID, SENDER, UNIT, AdtValue, Configuration, Frame,
                      PermanentMemory, Ref, RuntimeFault, alloc_contract, value_to_json)

ERROR_VAR = "$error"
ADT_DEPTH = 400


class Thrown(Exception):
    """A SmartML-level throw; ``value`` is the thrown value."""

    def __init__(self, value):
        super().__init__(value)
        self.value = value


class StuckError(Exception):
    pass


class ConstructorError(Exception):
    pass


# ------------------------------------------------------------------ trace

@dataclass(frozen=True)
class CallEnter:
    caller: int
    callee: int
    method: str
    transactional: bool
    contract: str = ""

    def to_json(self):
        return {"event": "CallEnter", "caller": str(self.caller), "callee": str(self.callee),
                "contract": self.contract, "method": self.method, "transactional": self.transactional}


@dataclass(frozen=True)
class CallReturn:
    id: int
    method: str
    ok: bool

    def to_json(self):
        return {"event": "CallReturn", "id": str(self.id), "method": self.method, "ok": self.ok}


@dataclass(frozen=True)
class FieldWrite:
    id: int
    field: str

    def to_json(self):
        return {"event": "FieldWrite", "id": str(self.id), "field": self.field}


@dataclass(frozen=True)
class FieldRead:
    id: int
    field: str

    def to_json(self):
        return {"event": "FieldRead", "id": str(self.id), "field": self.field}


@dataclass(frozen=True)
class Revert:
    depth: int  # open transactions before the revert, minus one

    def to_json(self):
        return {"event": "Revert", "depth": self.depth}


# ----------------------------------------------------------- step results

@dataclass(frozen=True)
class Next:
    config: Configuration
    events: tuple = ()


@dataclass(frozen=True)
class Terminated:
    config: Configuration
    value: object = UNIT
    events: tuple = ()


@dataclass(frozen=True)
class Stuck:
    config: Configuration
    reason: str = ""
    events: tuple = ()


@dataclass(frozen=True)
class Aborted:
    config: Configuration
    error: object = None
    events: tuple = ()


@dataclass(frozen=True)
class FuelExhausted:
    config: Configuration
    events: tuple = ()


@dataclass
class RunResult:
    outcome: object
    trace: list
    steps: int

    @property
    def config(self):
        return self.outcome.config


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _div(a, b):
    if b == 0:
        raise Thrown("DivisionByZero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


class Machine:
    def __init__(self, program: Resolved):
        self.r = program
        self._methods = {}

    def _lookup(self, contract, m):
        """Cached ``(decl, flattened body)`` or None."""
        key = (contract, m)
        try:
            return self._methods[key]
        except KeyError:
            found = self.r.lookup_method(contract, m)
            hit = None if found is None else (found[1], A.flatten(found[1].body))
            self._methods[key] = hit
            return hit

    # ---------------------------------------------------------- expressions

    def eval(self, e, active, vm, pm, reads=None, depth=0):
        """Value of the side-effect-free expression ``e``."""
        if isinstance(e, A.IntLit):
            return e.value
        if isinstance(e, A.BoolLit):
            return e.value
        if isinstance(e, A.StrLit):
            return e.value
        if isinstance(e, A.Var):
            try:
                return vm[e.name]
            except KeyError:
                raise StuckError(f"unbound variable {e.name}") from None
        if isinstance(e, A.Field):
            if pm is None:
                raise StuckError("no contract state here")
            if reads is not None:
                reads.append(FieldRead(active, e.name))
            try:
                return pm.read(active, e.name)
            except RuntimeFault as exc:
                raise StuckError(f"cannot read this.{e.name}: {exc}") from None
        if isinstance(e, A.This):
            return Ref(active)
        if isinstance(e, A.Sender):
            return vm.get(SENDER, ORIGIN)
        if isinstance(e, A.Amount):
            return vm.get(AMOUNT, 0)
        if isinstance(e, A.Not):
            v = self.eval(e.operand, active, vm, pm, reads, depth)
            if not isinstance(v, bool):
                raise StuckError("! applied to a non-boolean")
            return not v
        if isinstance(e, A.BinOp):
            a = self.eval(e.left, active, vm, pm, reads, depth)
            b = self.eval(e.right, active, vm, pm, reads, depth)
            if not (_is_int(a) and _is_int(b)):
                raise StuckError(f"{e.op} on non-integers")
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            return _div(a, b)
        if isinstance(e, A.BoolOp):
            return self._boolop(e, active, vm, pm, reads, depth)
        if isinstance(e, A.AdtCons):
            return AdtValue(e.ctor, tuple(self.eval(a, active, vm, pm, reads, depth) for a in e.args))
        if isinstance(e, A.AdtCall):
            args = tuple(self.eval(a, active, vm, pm, reads, depth) for a in e.args)
            return self.eval_adt(e.adt, e.fn, args, depth + 1)
        if isinstance(e, A.Proj):
            return self._proj(self.eval(e.target, active, vm, pm, reads, depth), e.name)
        raise StuckError(f"cannot evaluate {type(e).__name__}")

    def _boolop(self, e, active, vm, pm, reads, depth=0):
        a = self.eval(e.left, active, vm, pm, reads, depth)
        if e.op in ("&&", "||"):
            if not isinstance(a, bool):
                raise StuckError(f"{e.op} on a non-boolean")
            if (e.op == "&&" and not a) or (e.op == "||" and a):
                return a
            b = self.eval(e.right, active, vm, pm, reads, depth)
            if not isinstance(b, bool):
                raise StuckError(f"{e.op} on a non-boolean")
            return b
        b = self.eval(e.right, active, vm, pm, reads, depth)
        if e.op in ("==", "!="):
            if type(a) is not type(b) and not (a is UNIT and b is UNIT):
                raise StuckError(f"{e.op} on values of different types")
            return (a == b) == (e.op == "==")
        if not (_is_int(a) and _is_int(b)):
            raise StuckError(f"{e.op} on non-integers")
        return {"<=": a <= b, ">=": a >= b, "<": a < b, ">": a > b}[e.op]

    def _proj(self, v, name):
        if not isinstance(v, AdtValue):
            raise StuckError(f"projection .{name} of a non-ADT value")
        adt = self.r.ctor_adt(v.ctor)
        for p, arg in zip(adt.ctor(v.ctor).params, v.args):
            if p.name == name:
                return arg
        raise Thrown(f"AdtError: {v.ctor} has no argument {name}")

    # -------------------------------------------------------------- ADTs

    def eval_adt(self, adt, fn, args, depth=0):
        """Call-by-value evaluation of ADT function ``adt.fn`` on ``args``."""
        if depth > ADT_DEPTH:
            raise Thrown("AdtError: recursion too deep")
        decl = self.r.adts[adt].function(fn)
        if len(args) != len(decl.params):
            raise StuckError(f"{adt}.{fn} takes {len(decl.params)} arguments")
        env = {p.name: a for p, a in zip(decl.params, args)}
        value = self._dexpr(decl.body, env, self.r.adts[adt], depth)
        if not self.has_type(value, decl.ret, None):
            raise Thrown(f"AdtError: {adt}.{fn} returned a value of the wrong type")
        return value

    def _dexpr(self, d, env, adt, depth):
        while True:
            if isinstance(d, A.DReturn):
                return self._adt_expr(d.value, env, depth)
            if isinstance(d, A.DIf):
                c = self._adt_expr(d.cond, env, depth)
                if not isinstance(c, bool):
                    raise StuckError("non-boolean ADT condition")
                d = d.then if c else d.orelse
            elif isinstance(d, A.DLet):
                env = {**env, d.var: self._adt_expr(d.value, env, depth)}
                d = d.body
            elif isinstance(d, A.DSwitch):
                v = self._adt_expr(d.scrutinee, env, depth)
                d, env = self._match(d, v, env, depth)
            else:
                raise StuckError(f"bad ADT body {type(d).__name__}")

    def _match(self, d, v, env, depth):
        for case in d.cases:
            if case.ctor is not None:
                if isinstance(v, AdtValue) and v.ctor == case.ctor:
                    return case.body, {**env, **dict(zip(case.binders, v.args))}
            else:
                lit = self._adt_expr(case.literal, env, depth)
                if type(lit) is type(v) and lit == v:
                    return case.body, env
        if d.default is not None:
            return d.default, env
        raise Thrown("NonExhaustiveMatch")

    def _adt_expr(self, e, env, depth):
        if isinstance(e, (A.Field, A.This, A.Sender, A.Amount)):
            raise StuckError("contract state is not visible inside ADT functions")
        return self.eval(e, ORIGIN_ID, env, None, depth=depth)

    # ------------------------------------------------------------- typing

    def has_type(self, v, t, pm):
        if t == A.INT:
            return _is_int(v)
        if t == A.BOOL:
            return isinstance(v, bool)
        if t == A.STRING:
            return isinstance(v, str)
        if t == A.UNIT:
            return v is UNIT
        if t == A.ADDRESS:
            return isinstance(v, Ref)
        if isinstance(t, A.ContractType):
            if not isinstance(v, Ref):
                return False
            if v.id == ORIGIN_ID or pm is None:
                return True
            return v.id in pm and self.r.is_subcontract(pm.contract_of(v.id), t.name)
        if isinstance(t, A.AdtType):
            if not isinstance(v, AdtValue):
                return False
            k = self.r.adts[t.name].ctor(v.ctor)
            return k is not None and len(k.params) == len(v.args)
        return False

    def default(self, t, seen=frozenset()):
        if t == A.INT:
            return 0
        if t == A.BOOL:
            return False
        if t == A.STRING:
            return ""
        if t == A.UNIT:
            return UNIT
        if t == A.ADDRESS or isinstance(t, A.ContractType):
            return ORIGIN
        if isinstance(t, A.AdtType) and t.name not in seen:
            adt = self.r.adts[t.name]
            ctors = sorted(adt.ctors, key=lambda k: len(k.params))
            for k in ctors:
                try:
                    return AdtValue(k.name, tuple(self.default(p.type, seen | {t.name}) for p in k.params))
                except ConstructorError:
                    continue
        raise ConstructorError(f"no default value for {t}")

    # ------------------------------------------------------- constructors

    def exec_constructor(self, pm: PermanentMemory, contract, args, sender=ORIGIN):
        """Allocate and initialise one instance of ``contract``; returns ``(pm', id)``."""
        fields = self.r.fields(contract)
        values = {f.name: self.default(f.type) for f in fields}
        pm, id_ = alloc_contract(pm, contract, values, [f.name for f in fields])
        pm = self._init(pm, id_, contract, tuple(args), sender)
        return pm, id_

    def _init(self, pm, id_, contract, args, sender):
        decl = self.r.contracts[contract]
        k = decl.constructor
        params = k.params if k is not None else ()
        if len(args) != len(params):
            raise ConstructorError(f"{contract} constructor takes {len(params)} arguments, got {len(args)}")
        for p, a in zip(params, args):
            if not self.has_type(a, p.type, pm):
                raise ConstructorError(f"{contract} constructor: {p.name} expects {p.type}")
        vm = {p.name: a for p, a in zip(params, args)}
        vm[SENDER] = sender
        vm[AMOUNT] = 0
        if decl.parent is not None:
            sup = k.super_args if k is not None and k.super_args is not None else ()
            pm = self._init(pm, id_, decl.parent, tuple(self._ctor_eval(e, id_, vm, pm) for e in sup), sender)
        if k is not None:
            for name, rhs in k.inits:
                if isinstance(rhs, A.New):
                    sub_args = tuple(self._ctor_eval(e, id_, vm, pm) for e in rhs.args)
                    pm, sub = self.exec_constructor(pm, rhs.contract, sub_args, Ref(id_))
                    v = Ref(sub)
                else:
                    v = self._ctor_eval(rhs, id_, vm, pm)
                if not self.has_type(v, self.r.field(contract, name).type, pm):
                    raise ConstructorError(f"{contract}.{name} initialised with a value of the wrong type")
                pm = pm.write(id_, name, v)
        return pm

    def _ctor_eval(self, e, id_, vm, pm):
        try:
            return self.eval(e, id_, vm, pm)
        except (Thrown, StuckError) as exc:
            raise ConstructorError(f"constructor expression failed: {exc}") from None

    # --------------------------------------------------------- entry points

    def initial(self, pm, instance, method, args=(), sender=ORIGIN, amount=0) -> Configuration:
        """Configuration for an external call of ``instance.method(args)``;
        ``amount`` is credited to the instance before the snapshot."""
        contract = pm.contract_of(instance)
        found = self.r.lookup_method(contract, method)
        if found is None:
            raise KeyError(f"{contract} has no method {method}")
        decl = found[1]
        if len(args) != len(decl.params):
            raise ValueError(f"{contract}.{method} takes {len(decl.params)} arguments")
        for p, a in zip(decl.params, args):
            if not self.has_type(a, p.type, pm):
                raise ValueError(f"argument {p.name} of {contract}.{method} must be {p.type}")
        if amount:
            pm = pm.write(instance, BALANCE, pm.read(instance, BALANCE) + amount)
        vm = {p.name: a for p, a in zip(decl.params, args)}
        vm[SENDER] = sender
        vm[AMOUNT] = amount
        return Configuration(instance, (), vm, pm, (pm,), method, A.flatten(decl.body))

    def run(self, cfg: Configuration, fuel=100000) -> RunResult:
        if fuel <= 0:
            raise ValueError("fuel must be positive")
        sender = cfg.volatile.get(SENDER, ORIGIN)
        trace = [CallEnter(sender.id, cfg.active, cfg.method, True, cfg.permanent.contract_of(cfg.active))]
        for n in range(fuel):
            res = self.step(cfg)
            trace.extend(res.events)
            if isinstance(res, Next):
                cfg = res.config
                continue
            if isinstance(res, (Terminated, Aborted)):
                trace.append(CallReturn(res.config.active, res.config.method, isinstance(res, Terminated)))
            return RunResult(res, trace, n + 1)
        return RunResult(FuelExhausted(cfg), trace, fuel)

    def iter_steps(self, cfg: Configuration, fuel=100000):
        """Yield ``(config before, result)`` for every step taken."""
        for _ in range(fuel):
            res = self.step(cfg)
            yield cfg, res
            if not isinstance(res, Next):
                return
            cfg = res.config

    # ---------------------------------------------------------------- step

    def step(self, cfg: Configuration):
        events = []
        try:
            return self._step(cfg, events)
        except Thrown as t:
            return self._throw(cfg, t.value, events)
        except (StuckError, RuntimeFault, ConstructorError) as exc:
            return Stuck(cfg, str(exc), tuple(events))

    def _step(self, cfg, events):
        if not cfg.cont:
            return self._return(cfg, UNIT, events, implicit=True)
        s, rest = cfg.cont[0], cfg.cont[1:]
        ev = lambda e: self.eval(e, cfg.active, cfg.volatile, cfg.permanent, events)  # noqa: E731

        if isinstance(s, A.Assign):
            v, pm = self._rhs(s.rhs, cfg, events)
            cfg = self._store(cfg.with_(permanent=pm, cont=rest), s.target, v, events)
            return Next(cfg, tuple(events))
        if isinstance(s, A.Let):
            v, pm = self._rhs(s.rhs, cfg, events)
            vm = {**cfg.volatile, s.var: v}
            return Next(cfg.with_(volatile=vm, permanent=pm, cont=A.flatten(s.body) + rest), tuple(events))
        if isinstance(s, A.If):
            c = ev(s.cond)
            if not isinstance(c, bool):
                raise StuckError("non-boolean condition")
            branch = s.then if c else (s.orelse or A.Skip())
            return Next(cfg.with_(cont=A.flatten(branch) + rest), tuple(events))
        if isinstance(s, A.While):
            c = ev(s.cond)
            if not isinstance(c, bool):
                raise StuckError("non-boolean loop condition")
            cont = A.flatten(s.body) + (s,) + rest if c else rest
            return Next(cfg.with_(cont=cont), tuple(events))
        if isinstance(s, A.Assert):
            c = ev(s.cond)
            if not isinstance(c, bool):
                raise StuckError("non-boolean assertion")
            if not c:
                raise Thrown("assertion failed")
            return Next(cfg.with_(cont=rest), tuple(events))
        if isinstance(s, A.Return):
            v = UNIT if s.value is None else ev(s.value)
            return self._return(cfg, v, events)
        if isinstance(s, A.Throw):
            raise Thrown(ev(s.value))
        if isinstance(s, A.Call):
            return self._call(cfg, s, None, None, rest, events)
        if isinstance(s, A.CallAssign):
            return self._call(cfg, s, s.target, None, rest, events)
        if isinstance(s, A.Try):
            target = s.call.target if isinstance(s.call, A.CallAssign) else None
            return self._call(cfg, s.call, target, s, rest, events)
        raise StuckError(f"no rule for {type(s).__name__}")

    def _rhs(self, rhs, cfg, events):
        if isinstance(rhs, A.New):
            args = tuple(self.eval(a, cfg.active, cfg.volatile, cfg.permanent, events) for a in rhs.args)
            pm, id_ = self.exec_constructor(cfg.permanent, rhs.contract, args, Ref(cfg.active))
            return Ref(id_), pm
        return self.eval(rhs, cfg.active, cfg.volatile, cfg.permanent, events), cfg.permanent

    def _store(self, cfg, target, v, events):
        if target is None:
            return cfg
        if isinstance(target, A.Var):
            return cfg.with_(volatile={**cfg.volatile, target.name: v})
        if isinstance(target, A.Field):
            events.append(FieldWrite(cfg.active, target.name))
            return cfg.with_(permanent=cfg.permanent.write(cfg.active, target.name, v))
        raise StuckError("bad assignment target")

    def _call(self, cfg, call, target, try_stmt, rest, events):
        ev = lambda e: self.eval(e, cfg.active, cfg.volatile, cfg.permanent, events)  # noqa: E731
        recv = ev(call.receiver)
        if not isinstance(recv, Ref):
            raise StuckError("call on a non-address value")
        args = tuple(ev(a) for a in call.args)
        amount = 0 if call.value is None else ev(call.value)
        if not _is_int(amount):
            raise StuckError("non-integer transfer value")
        m = call.method
        pm = cfg.permanent

        if isinstance(call.receiver, A.This) and call.value is None and try_stmt is None:
            contract = pm.contract_of(cfg.active)
            found = self._lookup(contract, m)
            if found is None or len(found[0].params) != len(args):
                raise StuckError(f"{contract} has no method {m}/{len(args)}")
            decl, body = found
            frame = Frame(cfg.active, cfg.volatile, cfg.method, (A.Hole(target, False),) + rest)
            vm = {p.name: a for p, a in zip(decl.params, args)}
            vm[SENDER] = cfg.volatile.get(SENDER, ORIGIN)
            vm[AMOUNT] = cfg.volatile.get(AMOUNT, 0)
            events.append(CallEnter(cfg.active, cfg.active, m, False, contract))
            return Next(cfg.with_(stack=(frame,) + cfg.stack, volatile=vm, method=m,
                                  cont=body), tuple(events))

        if try_stmt is None:
            hole = A.Try(A.Hole(target, True), ERROR_VAR, A.Throw(A.Var(ERROR_VAR)), A.Skip())
        else:
            hole = A.Try(A.Hole(target, True), try_stmt.abort_var, try_stmt.abort, try_stmt.success)
        frame = Frame(cfg.active, cfg.volatile, cfg.method, (hole,) + rest)
        rollback = (pm,) + cfg.rollback
        callee = recv.id
        problem, decl, contract = None, None, ""
        if callee == ORIGIN_ID or callee not in pm:
            problem = f"call to {recv}, an address without code"
        else:
            contract = pm.contract_of(callee)
            found = self._lookup(contract, m)
            if found is None:
                problem = f"{contract} has no method {m}"
            elif len(found[0].params) != len(args) or not all(
                    self.has_type(a, p.type, pm) for p, a in zip(found[0].params, args)):
                problem = f"bad arguments for {contract}.{m}"
            else:
                decl, body = found
        if problem is None and amount:
            bal = pm.read(cfg.active, BALANCE)
            if amount < 0 or bal < amount:
                problem = "insufficient balance"
            else:
                pm = pm.write(cfg.active, BALANCE, bal - amount)
                events.append(FieldWrite(cfg.active, BALANCE))
        events.append(CallEnter(cfg.active, callee, m, True, contract))
        vm = {SENDER: Ref(cfg.active), AMOUNT: amount}
        pushed = cfg.with_(active=callee, stack=(frame,) + cfg.stack, volatile=vm, permanent=pm,
                           rollback=rollback, method=m, cont=())
        if problem is not None:
            return self._throw(pushed, problem, events)
        if amount:
            pm = pm.write(callee, BALANCE, pm.read(callee, BALANCE) + amount)
            events.append(FieldWrite(callee, BALANCE))
        vm.update({p.name: a for p, a in zip(decl.params, args)})
        return Next(pushed.with_(permanent=pm, volatile=vm, cont=body), tuple(events))

    def _return(self, cfg, v, events, implicit=False):
        if implicit:
            sig = self.r.mtype(cfg.permanent.contract_of(cfg.active), cfg.method)
            if sig is not None and sig[1] != A.UNIT:
                raise StuckError(f"{cfg.method} ended without returning a value")
        if not cfg.stack:
            return Terminated(cfg.with_(cont=()), v, tuple(events))
        f = cfg.stack[0]
        head, rest = f.cont[0], f.cont[1:]
        events.append(CallReturn(cfg.active, cfg.method, True))
        if isinstance(head, A.Hole):
            out = cfg.with_(active=f.contract, stack=cfg.stack[1:], volatile=f.volatile,
                            method=f.method, cont=rest)
        elif isinstance(head, A.Try) and isinstance(head.call, A.Hole):
            out = cfg.with_(active=f.contract, stack=cfg.stack[1:], volatile=f.volatile,
                            rollback=cfg.rollback[1:], method=f.method, cont=A.flatten(head.success) + rest)
            head = head.call
        else:
            raise StuckError("caller frame has no pending call")
        out = self._store(out, head.target, v, events)
        return Next(out, tuple(events))

    def _throw(self, cfg, err, events):
        cur = cfg
        while cur.stack:
            events.append(CallReturn(cur.active, cur.method, False))
            f = cur.stack[0]
            head = f.cont[0]
            if isinstance(head, A.Hole):
                cur = cur.with_(active=f.contract, stack=cur.stack[1:], volatile=f.volatile,
                                method=f.method, cont=f.cont[1:])
                continue
            depth = len(cur.rollback) - 1
            vm = dict(f.volatile)
            if head.abort_var is not None:
                vm[head.abort_var] = err
            events.append(Revert(depth))
            out = cur.with_(active=f.contract, stack=cur.stack[1:], volatile=vm,
                            permanent=cur.rollback[0], rollback=cur.rollback[1:],
                            method=f.method, cont=A.flatten(head.abort) + f.cont[1:])
            return Next(out, tuple(events))
        base = cur.rollback[-1] if cur.rollback else cur.permanent
        events.append(Revert(0))
        return Aborted(cur.with_(permanent=base, rollback=(), cont=()), err, tuple(events))


def execute(program: Resolved, pm, instance, method, args=(), sender=ORIGIN, amount=0, fuel=100000):
    m = Machine(program)
    return m.run(m.initial(pm, instance, method, args, sender, amount), fuel)


def trace_jsonl(trace) -> str:
    from .runtime import canonical
    return "".join(canonical(e.to_json()) + "\n" for e in trace)


def result_json(res: RunResult):
    out = res.outcome
    d = {"outcome": type(out).__name__, "steps": res.steps}
    if isinstance(out, Terminated):
        d["value"] = value_to_json(out.value)
    elif isinstance(out, Aborted):
        d["error"] = value_to_json(out.error) if out.error is not None else None
    elif isinstance(out, Stuck):
        d["reason"] = out.reason
    return d
