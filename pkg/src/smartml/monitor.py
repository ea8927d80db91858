"""Dynamic reentrance detection and trace classification.

A *witness* is a triple ``(i, k, j)`` of call-stack positions, counted from
the bottom, with ``i < k < j``, the same instance and method at ``i`` and
``j``, and a different instance at ``k``.

Classifying a trace replays its call events on a shadow stack.  When a call
creates a witness, the frames of the ``i`` activation's contiguous
same-instance run are *tainted*: they are suspended activations whose
remaining code resumes after the reentrant call returns.  A field write
that lands while such a frame heads the running instance's segment is a
write performed on behalf of a re-entered activation.
"""
from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field

from . import ast as A
from .interpreter import CallEnter, CallReturn, FieldWrite, Machine, RunResult
from .resolve import BALANCE, Resolved
from .runtime import ORIGIN, AdtValue, Configuration, PermanentMemory, Ref

STRICT = "StrictSafe"
NON_MODIFYING = "NonModifyingSafe"
MODIFYING = "ModifyingSafe"
UNSAFE = "Unsafe"
LEVELS = (STRICT, NON_MODIFYING, MODIFYING, UNSAFE)
EXPLAIN_LIMIT = 20  # witnesses per trace whose stacks are kept for diagrams


@dataclass(frozen=True)
class ReentranceWitness:
    i: int
    k: int
    j: int
    instance: int      # c_i = c_j
    intermediate: int  # c_k
    method: str        # m_i = m_j
    position: int = -1  # trace index of the CallEnter that created j

    def to_json(self):
        return {"i": self.i, "k": self.k, "j": self.j, "instance": str(self.instance),
                "intermediate": str(self.intermediate), "method": self.method,
                "position": self.position}


@dataclass
class SafetyVerdict:
    level: str
    witnesses: list = field(default_factory=list)
    writes: list = field(default_factory=list)       # (position, FieldWrite, relevant)
    violations: list = field(default_factory=list)   # (position, FieldWrite)
    stacks: dict = field(default_factory=dict)       # witness position -> frames at that point

    def at_least(self, level) -> bool:
        """True when this verdict is ``level`` or a stronger guarantee."""
        return LEVELS.index(self.level) <= LEVELS.index(level)

    def to_json(self):
        return {
            "level": self.level,
            "witnesses": [w.to_json() for w in self.witnesses],
            "reentrant_writes": [{"position": p, "id": str(w.id), "field": w.field, "relevant": rel}
                                 for p, w, rel in self.writes],
            "violations": [{"position": p, "id": str(w.id), "field": w.field} for p, w in self.violations],
        }

    def explain(self) -> str:
        lines = [f"verdict: {self.level}"]
        for w in self.witnesses:
            if w.position not in self.stacks:
                continue
            lines.append("")
            lines.append(f"reentrance into #{w.instance}.{w.method} (event {w.position}):")
            frames = self.stacks.get(w.position, [])
            for idx in reversed(range(len(frames))):
                inst, contract, meth = frames[idx]
                tag = {w.i: "  <- i", w.k: "  <- k", w.j: "  <- j"}.get(idx, "")
                lines.append(f"  [{idx}] #{inst} {contract}.{meth}{tag}")
        for p, wr in self.violations:
            lines.append(f"violation: event {p} writes relevant field #{wr.id}.{wr.field}")
        return "\n".join(lines)


# ------------------------------------------------------------- detection

def _witnesses(frames):
    """All ``(i, k, j)`` over ``frames``, a bottom-first list of ``(instance, method)``."""
    out = []
    n = len(frames)
    for j in range(n):
        cj, mj = frames[j]
        for i in range(j):
            if frames[i] != (cj, mj):
                continue
            for k in range(i + 1, j):
                if frames[k][0] != cj:
                    out.append(ReentranceWitness(i, k, j, cj, frames[k][0], mj))
    return out


def open_calls(trace):
    """Bottom-first ``(instance, method)`` chain of calls still open after ``trace``."""
    stack = []
    for e in trace:
        if isinstance(e, CallEnter):
            stack.append((e.callee, e.method))
        elif isinstance(e, CallReturn):
            stack.pop()
    return stack


def detect_reentrance(source):
    """Every witness present in a configuration's call stack, or in the
    open-call chain of a trace prefix."""
    if isinstance(source, Configuration):
        frames = list(reversed(source.frames()))
    else:
        frames = open_calls(source)
    return _witnesses(frames)


def is_reentrant(source) -> bool:
    return bool(detect_reentrance(source))


# --------------------------------------------------------- classification

def _irrelevant_fn(program):
    if program is None:
        return lambda contract, f: False
    if callable(program):
        return program
    if isinstance(program, (set, frozenset)):
        return lambda contract, f: (contract, f) in program
    return program.is_irrelevant


def classify_trace(trace, irrelevant=None) -> SafetyVerdict:
    """Classify one complete trace.  ``irrelevant`` is a :class:`Resolved`
    program, a set of ``(contract, field)`` pairs, or a predicate.

    One witness is reported per reentrant call, using the nearest matching
    earlier frame; every matching frame is tainted."""
    is_irr = _irrelevant_fn(irrelevant)
    contracts = {}
    stack = []        # [instance, method, tainted, run start]
    occurs = {}       # (instance, method) -> ascending stack indices of live frames
    pending = {}      # the untainted subset of ``occurs``
    tainted = []      # ascending tainted stack indices
    witnesses, writes, violations, stacks = [], [], [], {}
    for pos, e in enumerate(trace):
        if isinstance(e, CallEnter):
            if e.contract:
                contracts[e.callee] = e.contract
            j = len(stack)
            start = stack[-1][3] if stack and stack[-1][0] == e.callee else j
            stack.append([e.callee, e.method, False, start])
            key = (e.callee, e.method)
            seen = occurs.setdefault(key, [])
            waiting = pending.setdefault(key, [])
            cut = bisect.bisect_left(seen, start)
            if cut:
                i = seen[cut - 1]
                k = _run_end(stack, i) + 1
                witnesses.append(ReentranceWitness(i, k, j, e.callee, stack[k][0], e.method, pos))
                if len(stacks) < EXPLAIN_LIMIT:
                    stacks[pos] = [(f[0], contracts.get(f[0], "?"), f[1]) for f in stack]
                cut = bisect.bisect_left(waiting, start)
                for i in waiting[:cut]:
                    _taint_run(stack, i, tainted)
                del waiting[:cut]
            seen.append(j)
            waiting.append(j)
        elif isinstance(e, CallReturn):
            inst, meth, was_tainted, _ = stack.pop()
            if was_tainted:
                tainted.pop()
            for table in (occurs, pending):
                lst = table[(inst, meth)]
                if lst and lst[-1] == len(stack):
                    lst.pop()
        elif isinstance(e, FieldWrite) and stack:
            top = stack[-1]
            if e.id != top[0] or not tainted or tainted[-1] < top[3]:
                continue
            relevant = not is_irr(contracts.get(e.id, ""), e.field)
            writes.append((pos, e, relevant))
            if relevant:
                violations.append((pos, e))
    if not witnesses:
        level = STRICT
    elif not writes:
        level = NON_MODIFYING
    elif not violations:
        level = MODIFYING
    else:
        level = UNSAFE
    return SafetyVerdict(level, witnesses, writes, violations, stacks)


def _run_end(stack, i):
    inst = stack[i][0]
    while i + 1 < len(stack) and stack[i + 1][0] == inst:
        i += 1
    return i


def _taint_run(stack, i, tainted):
    inst = stack[i][0]
    while i < len(stack) and stack[i][0] == inst and not stack[i][2]:
        stack[i][2] = True
        bisect.insort(tainted, i)
        i += 1


def combine(verdicts) -> str:
    """Weakest level over several verdicts."""
    worst = 0
    for v in verdicts:
        worst = max(worst, LEVELS.index(v.level))
    return LEVELS[worst]


# ----------------------------------------------------------------- fuzzing

@dataclass
class FuzzCase:
    index: int
    contract: str
    instance: int
    method: str
    args: tuple
    sender: Ref
    amount: int
    config: Configuration

    def describe(self):
        from .runtime import show
        args = ", ".join(show(a) for a in self.args)
        return f"#{self.instance} {self.contract}.{self.method}({args}) from {self.sender} with {self.amount}"


@dataclass
class FuzzRun:
    case: FuzzCase
    result: RunResult

    @property
    def trace(self):
        return self.result.trace


_STRINGS = ("", "a", "err")


class _World:
    def __init__(self, program: Resolved, rng: random.Random):
        self.r = program
        self.m = Machine(program)
        self.rng = rng

    def value(self, t, pm, depth=0):
        rng = self.rng
        if t == A.INT:
            return rng.randint(-3, 5)
        if t == A.BOOL:
            return rng.random() < 0.5
        if t == A.STRING:
            return rng.choice(_STRINGS)
        if t == A.ADDRESS:
            ids = pm.ids()
            return Ref(rng.choice(ids + [0])) if ids else ORIGIN
        if isinstance(t, A.ContractType):
            ids = [i for i in pm.ids() if self.r.is_subcontract(pm.contract_of(i), t.name)]
            return Ref(rng.choice(ids)) if ids else ORIGIN
        if isinstance(t, A.AdtType):
            ctors = self.r.adts[t.name].ctors
            if depth >= 3:
                base = [k for k in ctors if not any(isinstance(p.type, A.AdtType) for p in k.params)]
                ctors = base or ctors
            k = rng.choice(ctors)
            return AdtValue(k.name, tuple(self.value(p.type, pm, depth + 1) for p in k.params))
        return ORIGIN

    def deploy(self):
        """One instance of every constructible contract, randomly wired."""
        pm = PermanentMemory()
        for c in self.r.contracts:
            params = self.r.constructor_params(c)
            args = tuple(self.value(p.type, pm) for p in params)
            try:
                pm, _ = self.m.exec_constructor(pm, c, args)
            except Exception:  # constructor throws or is ill-typed for these arguments
                continue
        for i in pm.ids():
            contract = pm.contract_of(i)
            for f in self.r.fields(contract):
                if f.name == BALANCE:
                    pm = pm.write(i, BALANCE, self.rng.randint(0, 4))
                elif (isinstance(f.type, A.ContractType) or f.type == A.ADDRESS) and self.rng.random() < 0.7:
                    pm = pm.write(i, f.name, self.value(f.type, pm))
        return pm


def entry_points(program: Resolved):
    """``(contract, method)`` for every method callable on every contract."""
    out = []
    for c in program.contracts:
        seen = set()
        for anc in program.ancestors(c):
            for m in program.contracts[anc].methods:
                if m.name not in seen:
                    seen.add(m.name)
                    out.append((c, m.name))
    return out


def fuzz_cases(program: Resolved, seed=0, budget=100, entry=None):
    """Yield ``budget`` random initial configurations, deterministic in ``seed``."""
    rng = random.Random(seed)
    world = _World(program, rng)
    entries = entry_points(program)
    if entry is not None:
        entries = [e for e in entries if e == tuple(entry)]
    if not entries:
        return
    produced = attempts = 0
    while produced < budget and attempts < budget * 20:
        attempts += 1
        pm = world.deploy()
        c, m = rng.choice(entries)
        candidates = [i for i in pm.ids() if pm.contract_of(i) == c]
        if not candidates:
            continue
        inst = rng.choice(candidates)
        decl = program.lookup_method(c, m)[1]
        args = tuple(world.value(p.type, pm) for p in decl.params)
        others = [i for i in pm.ids() if i != inst]
        sender = Ref(rng.choice(others)) if others and rng.random() < 0.5 else ORIGIN
        amount = rng.choice((0, 0, 1, 2))
        cfg = world.m.initial(pm, inst, m, args, sender, amount)
        yield FuzzCase(produced, c, inst, m, args, sender, amount, cfg)
        produced += 1


def fuzz_reachable(program: Resolved, seed=0, budget=100, fuel=5000, entry=None):
    """Stream of :class:`FuzzRun`; each holds a full trace."""
    m = Machine(program)
    for case in fuzz_cases(program, seed, budget, entry):
        yield FuzzRun(case, m.run(case.config, fuel))


def monitor_program(program: Resolved, seed=0, budget=100, fuel=5000, entry=None):
    """``[(FuzzRun, SafetyVerdict)]`` over a fuzzing campaign."""
    return [(run, classify_trace(run.trace, program))
            for run in fuzz_reachable(program, seed, budget, fuel, entry)]


def report_json(pairs):
    runs = []
    for run, verdict in pairs:
        runs.append({"case": run.case.describe(), "outcome": type(run.result.outcome).__name__,
                     "verdict": verdict.to_json()})
    return {"schema": "smartml.monitor/1", "level": combine(v for _, v in pairs), "runs": runs}


__all__ = ["ReentranceWitness", "SafetyVerdict", "detect_reentrance", "is_reentrant", "classify_trace",
           "fuzz_cases", "fuzz_reachable", "monitor_program", "entry_points", "combine", "open_calls",
           "report_json", "STRICT", "NON_MODIFYING", "MODIFYING", "UNSAFE", "LEVELS"]
