"""Random well-formed SmartML programs for differential testing.

Programs have two or three contracts of up to three methods each.  Every
contract has an int field, an irrelevant counter and a peer reference, so
bodies can mix state updates, external calls, callbacks through ``sender``,
internal calls and ``try`` blocks.  Whether a program is reentrance safe is
left to chance, though the ``tail`` style mostly yields safe ones.
"""
from __future__ import annotations

import random

_NAMES = ("ping", "pong", "poke", "drain", "sync")


class _Gen:
    def __init__(self, rng: random.Random, n_contracts, style):
        self.rng = rng
        self.style = style
        self.pure = style != "random"  # calls only where the style puts them
        self.names = [f"K{i}" for i in range(n_contracts)]
        n = len(self.names)
        self.peer = {c: (self.names[(i + 1) % n] if rng.random() < 0.7 else rng.choice(self.names))
                     for i, c in enumerate(self.names)}
        self.methods = {}
        for c in self.names:
            k = rng.randint(1, 3)
            ms = rng.sample(_NAMES, k)
            self.methods[c] = [(m, rng.random() < 0.3, rng.random() < 0.3) for m in ms]  # (name, has param, returns int)

    # -- expressions

    def int_expr(self, scope, depth=0):
        rng = self.rng
        atoms = ["x", "hits", str(rng.randint(0, 3)), "<amount>"] + scope
        if depth < 1 and rng.random() < 0.4:
            op = rng.choice(["+", "-"])
            return f"{self.int_expr(scope, depth + 1)} {op} {self.int_expr(scope, depth + 1)}"
        return rng.choice(atoms)

    def cond(self, scope):
        op = self.rng.choice(["<", ">", "==", "!=", "<=", ">="])
        return f"{self.int_expr(scope, 1)} {op} {self.int_expr(scope, 1)}"

    # -- statements

    def call(self, c, scope, external_only=False):
        rng = self.rng
        peer = self.peer[c]
        kind = rng.random()
        if external_only and 0.25 <= kind < 0.45:
            kind = 0.5
        if kind < 0.25:
            recv, target = "sender", None
            options = [(d, m) for d in self.names for (m, p, r) in self.methods[d] if not p]
            if not options:
                return None
            d, m = rng.choice(options)
            args = ""
        elif kind < 0.45:
            recv, target = "this", c
            m, p, r = rng.choice(self.methods[c])
            args = self.int_expr(scope, 1) if p else ""
        else:
            recv, target = "peer", peer
            m, p, r = rng.choice(self.methods[peer])
            args = self.int_expr(scope, 1) if p else ""
        value = ""
        if recv != "this" and rng.random() < 0.3:
            value = "$" + rng.choice(["1", "0", "hits"])
        if recv == "this":
            if rng.random() < 0.2:
                value = "$0"
        text = f"{recv}{value}.{m}({args})"
        returns = recv != "sender" and dict((n, r) for n, _, r in self.methods[target])[m]
        return text, returns

    def stmt(self, c, scope, depth, fuel):
        rng = self.rng
        r = rng.random()
        if r < 0.2:
            return [f"x = {self.int_expr(scope)};"]
        if r < 0.28:
            return ["hits = hits + 1;"]
        if r < 0.38 and depth < 2:
            then = self.block(c, scope, depth + 1, fuel)
            orelse = self.block(c, scope, depth + 1, fuel)
            return [f"if ({self.cond(scope)}) {{"] + then + ["} else {"] + orelse + ["}"]
        if r < 0.46 and depth < 2:
            # a guard that bounds callback chains
            field = rng.choice(["x", "hits"])
            inner = [f"{field} = {field} + 1;"] if rng.random() < 0.5 else []
            inner += self.block(c, scope, depth + 1, fuel) + self.external(c, scope, depth, fuel)
            if rng.random() < 0.5:
                inner.append(f"{field} = {field} - 1;")
            return [f"if ({field} < {rng.randint(1, 3)}) {{"] + inner + ["}"]
        if r < 0.5:
            return [f"assert({self.cond(scope)});"]
        if r < 0.52:
            return ['throw "stop";']
        if r < 0.56 and depth < 2:
            v = f"i{depth}"
            body = self.block(c, scope + [v], depth + 1, fuel)
            return [f"int {v} = 0;", f"while ({v} < 2) {{"] + body + [f"{v} = {v} + 1;", "}"]
        return self.external(c, scope, depth, fuel)

    def external(self, c, scope, depth, fuel, plain=False):
        rng = self.rng
        if self.pure or fuel[0] <= 0:
            return [f"x = x + {rng.randint(1, 3)};"]
        fuel[0] -= 1
        made = self.call(c, scope, external_only=plain)
        if made is None:
            return ["hits = hits + 1;"]
        text, returns = made
        if plain:
            return [f"{text};"]
        if rng.random() < 0.35 and not text.startswith("this."):
            abort = self.block(c, scope, depth + 1, fuel)
            success = self.block(c, scope, depth + 1, fuel)
            head = f"try x = {text};" if returns else f"try {text};"
            return [head, "abort {"] + abort + ["} success {"] + success + ["}"]
        if returns and rng.random() < 0.6:
            return [f"x = {text};"]
        return [f"{text};"]

    def block(self, c, scope, depth, fuel):
        out = []
        for _ in range(self.rng.randint(0, 2)):
            out += self.stmt(c, scope, depth, fuel)
        return out

    def method(self, c, m, has_param, returns):
        scope = ["n"] if has_param else []
        fuel = [self.rng.randint(1, 3)]
        body = []
        for _ in range(self.rng.randint(1, 4)):
            body += self.stmt(c, scope, 0, fuel)
        if self.style == "tail":
            # effects first, interactions last
            self.pure = False
            body += self.external(c, scope, 2, [1], plain=True)
            self.pure = True
            if self.rng.random() < 0.5:
                body.append("hits = hits + 1;")
        if returns:
            body.append(f"return {self.int_expr(scope)};")
        head = "int" if returns else "function"
        params = "int n" if has_param else ""
        return [f"  {head} {m}({params}) {{"] + ["    " + s for s in body] + ["  }"]

    def program(self):
        out = []
        for c in self.names:
            out.append(f"contract {c} {{")
            out.append("  int x;")
            out.append("  irrelevant int hits;")
            out.append(f"  {self.peer[c]} peer;")
            for m, p, r in self.methods[c]:
                out += self.method(c, m, p, r)
            out.append("}")
            out.append("")
        return "\n".join(out)


STYLES = ("random", "tail", "pure")


def random_program(seed, style=None) -> str:
    """Source text of a random program.  ``style`` is ``"pure"`` (no external
    calls), ``"tail"`` (external calls only at the end of a method) or
    ``"random"``; by default it is drawn from ``seed`` too."""
    rng = random.Random(seed)
    if style is None:
        style = rng.choices(STYLES, (5, 3, 2))[0]
    return _Gen(rng, rng.randint(2, 3), style).program()


def corpus(n, seed=0):
    """``n`` program sources derived from ``seed``."""
    rng = random.Random(seed)
    return [random_program(rng.getrandbits(32)) for _ in range(n)]
