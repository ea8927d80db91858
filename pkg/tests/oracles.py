"""Independent reference implementations used as test oracles.

They share no code with the modules under test beyond the AST classes and
the resolved program tables.
"""
import dataclasses
import itertools
from collections import Counter

from smartml import ast as A
from smartml.runtime import AdtValue, Ref

# ------------------------------------------------------------ locs oracle


def _children(node):
    for f in dataclasses.fields(node):
        if f.name == "loc":
            continue
        v = getattr(node, f.name)
        items = v if isinstance(v, (list, tuple)) else (v,)
        for item in items:
            if isinstance(item, A.Node):
                yield item


def locs_oracle(program, ids, p, this_type):
    """Walk every node reflectively and count field access sites."""
    out = Counter()

    def visit(node, seen):
        if isinstance(node, A.Field):
            for a in ids:
                out[(a, node.name)] += 1
        if isinstance(node, (A.Call, A.CallAssign)):
            if isinstance(node.receiver, A.This):
                if node.value is not None:
                    for a in ids:
                        out[(a, "balance")] += 1
                found = program.lookup_method(this_type, node.method)
                if found and (this_type, node.method) not in seen:
                    visit(found[1].body, seen | {(this_type, node.method)})
            else:
                for a in ids:
                    for f in program.fields(a.contract):
                        out[(a, f.name)] += 1
        for child in _children(node):
            visit(child, seen)

    if p is not None:
        visit(p, frozenset())
    return out


# ------------------------------------------------------------- ADT oracle


def to_list_int(values):
    v = AdtValue("nil")
    for x in reversed(values):
        v = AdtValue("cons", (x, v))
    return v


def from_list_int(v):
    out = []
    while v.ctor == "cons":
        out.append(v.args[0])
        v = v.args[1]
    return out


def index_of(values, n):
    return values.index(n) if n in values else -1


def add(values, e):
    return [e] + list(values)


# --------------------------------------------------------- witness oracle


def brute_witnesses(frames):
    """All (i, k, j) meeting the matrix over bottom-first (instance, method) frames."""
    out = set()
    for i, k, j in itertools.product(range(len(frames)), repeat=3):
        if i != j and frames[i] == frames[j] and i < k < j and frames[k][0] != frames[i][0]:
            out.add((i, k, j))
    return out


# --------------------------------------------------------- integer division


def trunc_div(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def ref(i):
    return Ref(i)


# ---------------------------------------------------------- taint oracle


def brute_violations(trace, irrelevant):
    """Positions of relevant writes made on behalf of a re-entered activation.

    Recomputes every witness from scratch at each call and keeps per-frame
    taint flags in a plain list; ``irrelevant`` is a set of (contract, field).
    """
    from smartml.interpreter import CallEnter, CallReturn, FieldWrite

    contracts, frames, out = {}, [], []   # frames: [instance, method, tainted]
    for pos, e in enumerate(trace):
        if isinstance(e, CallEnter):
            contracts[e.callee] = e.contract
            frames.append([e.callee, e.method, False])
            pairs = [(f[0], f[1]) for f in frames]
            for i, k, j in brute_witnesses(pairs):
                if j != len(frames) - 1:
                    continue
                x = i
                while x < len(frames) and frames[x][0] == frames[i][0]:
                    frames[x][2] = True
                    x += 1
        elif isinstance(e, CallReturn):
            frames.pop()
        elif isinstance(e, FieldWrite) and frames and frames[-1][0] == e.id:
            x = len(frames) - 1
            hit = False
            while x >= 0 and frames[x][0] == e.id:
                hit = hit or frames[x][2]
                x -= 1
            if hit and (contracts.get(e.id), e.field) not in irrelevant:
                out.append(pos)
    return out
