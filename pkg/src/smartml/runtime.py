"""Semantic values, memories, frames and configurations.

Permanent memory is persistent: every write returns a new memory and the
old handle keeps reading the old values.  Instance ids start at 1; id 0 is
the external origin of a transaction (an account without code).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import ast as A
from .pretty import stmt as _stmt_text

SENDER = "$sender"
AMOUNT = "$amount"
ORIGIN_ID = 0


class RuntimeFault(Exception):
    pass


class MissingField(RuntimeFault):
    pass


class UnknownInstance(RuntimeFault):
    pass


class UnknownField(RuntimeFault):
    pass


class EmptyRollback(RuntimeFault):
    pass


# ---------------------------------------------------------------- values

@dataclass(frozen=True, order=True)
class Ref:
    """Address of a contract instance (or of the origin, id 0)."""
    id: int

    def __str__(self):
        return f"#{self.id}"


ORIGIN = Ref(ORIGIN_ID)


@dataclass(frozen=True)
class AdtValue:
    ctor: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.ctor
        return f"{self.ctor}({', '.join(show(a) for a in self.args)})"


class _Unit:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "UNIT"

    def __reduce__(self):
        return (_Unit, ())


UNIT = _Unit()


def show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if v is UNIT:
        return "()"
    return str(v)


def value_to_json(v):
    if isinstance(v, bool):
        return {"bool": v}
    if isinstance(v, int):
        return {"int": v}
    if isinstance(v, str):
        return {"string": v}
    if isinstance(v, Ref):
        return {"ref": str(v.id)}
    if isinstance(v, AdtValue):
        return {"adt": v.ctor, "args": [value_to_json(a) for a in v.args]}
    if v is UNIT:
        return {"unit": None}
    raise TypeError(f"not a value: {v!r}")


def value_from_json(d):
    if "bool" in d:
        return bool(d["bool"])
    if "int" in d:
        return int(d["int"])
    if "string" in d:
        return d["string"]
    if "ref" in d:
        return Ref(int(d["ref"]))
    if "adt" in d:
        return AdtValue(d["adt"], tuple(value_from_json(a) for a in d["args"]))
    if "unit" in d:
        return UNIT
    raise ValueError(f"bad value encoding: {d!r}")


# --------------------------------------------------------------- memories

@dataclass(frozen=True)
class Instance:
    contract: str
    fields: tuple  # sorted (name, value) pairs

    def get(self, name):
        for k, v in self.fields:
            if k == name:
                return v
        raise UnknownField(name)

    def with_field(self, name, value):
        out, found = [], False
        for k, v in self.fields:
            if k == name:
                out.append((k, value))
                found = True
            else:
                out.append((k, v))
        if not found:
            raise UnknownField(name)
        return Instance(self.contract, tuple(out))


class PermanentMemory:
    """Immutable map from instance id to :class:`Instance`."""

    __slots__ = ("_instances", "next_id")

    def __init__(self, instances=None, next_id=1):
        self._instances = dict(instances or {})
        self.next_id = next_id

    def __contains__(self, id_):
        return id_ in self._instances

    def __eq__(self, other):
        return (isinstance(other, PermanentMemory) and self.next_id == other.next_id
                and self._instances == other._instances)

    def __hash__(self):
        return hash((self.next_id, tuple(sorted(self._instances.items()))))

    def __repr__(self):
        return f"PermanentMemory({self._instances!r})"

    def ids(self):
        return sorted(self._instances)

    def instance(self, id_) -> Instance:
        try:
            return self._instances[id_]
        except KeyError:
            raise UnknownInstance(id_) from None

    def contract_of(self, id_) -> str:
        return self.instance(id_).contract

    def read(self, id_, name):
        return self.instance(id_).get(name)

    def write(self, id_, name, value) -> "PermanentMemory":
        inst = self.instance(id_).with_field(name, value)
        instances = dict(self._instances)
        instances[id_] = inst
        return PermanentMemory(instances, self.next_id)

    def alloc(self, contract, values: dict):
        id_ = self.next_id
        instances = dict(self._instances)
        instances[id_] = Instance(contract, tuple(sorted(values.items())))
        return PermanentMemory(instances, id_ + 1), id_

    def to_json(self):
        return {
            "next_id": self.next_id,
            "instances": {
                str(i): {"contract": inst.contract,
                         "fields": {k: value_to_json(v) for k, v in inst.fields}}
                for i, inst in sorted(self._instances.items())
            },
        }

    @classmethod
    def from_json(cls, d):
        instances = {}
        for k, inst in d["instances"].items():
            fields = tuple(sorted((f, value_from_json(v)) for f, v in inst["fields"].items()))
            instances[int(k)] = Instance(inst["contract"], fields)
        return cls(instances, d["next_id"])


def alloc_contract(pm: PermanentMemory, contract: str, values: dict, expected=None):
    """Allocate a fresh instance; ``expected`` is the full field-name list
    the values must cover."""
    if expected is not None:
        missing = [f for f in expected if f not in values]
        if missing:
            raise MissingField(f"{contract}: no value for {', '.join(missing)}")
        extra = [f for f in values if f not in expected]
        if extra:
            raise UnknownField(f"{contract}: {', '.join(extra)}")
    return pm.alloc(contract, values)


def read_field(pm: PermanentMemory, id_, name):
    return pm.read(id_, name)


def write_field(pm: PermanentMemory, id_, name, value) -> PermanentMemory:
    return pm.write(id_, name, value)


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# -------------------------------------------------------- configurations

@dataclass(frozen=True)
class Frame:
    """A suspended activation: ``cont[0]`` holds the hole-bearing call site."""
    contract: int
    volatile: dict = field(hash=False)
    method: str = ""
    cont: tuple = ()

    @property
    def hole(self):
        head = self.cont[0] if self.cont else None
        if isinstance(head, A.Hole):
            return head
        if isinstance(head, A.Try) and isinstance(head.call, A.Hole):
            return head.call
        return None

    @property
    def transactional(self):
        h = self.hole
        return h is not None and h.transactional


@dataclass(frozen=True)
class Configuration:
    active: int
    stack: tuple  # of Frame; stack[0] is the immediate caller
    volatile: dict = field(hash=False)
    permanent: PermanentMemory = None
    rollback: tuple = ()  # rollback[0] is the most recent snapshot
    method: str = ""
    cont: tuple = ()

    def with_(self, **kw) -> "Configuration":
        # hot path: cheaper than dataclasses.replace
        d = dict(self.__dict__)
        d.update(kw)
        return Configuration(**d)

    def frames(self):
        """``(instance, method)`` pairs from the active frame downwards."""
        return [(self.active, self.method)] + [(f.contract, f.method) for f in self.stack]

    def open_transactions(self):
        return sum(1 for f in self.stack if f.transactional)

    def to_json(self):
        return {
            "active": str(self.active),
            "method": self.method,
            "volatile": _volatile_json(self.volatile),
            "permanent": self.permanent.to_json(),
            "rollback": [pm.to_json() for pm in self.rollback],
            "continuation": _cont_text(self.cont),
            "stack": [
                {"contract": str(f.contract), "method": f.method,
                 "volatile": _volatile_json(f.volatile), "continuation": _cont_text(f.cont)}
                for f in self.stack
            ],
        }


def _volatile_json(vm):
    return {k: value_to_json(v) for k, v in sorted(vm.items())}


def _cont_text(cont):
    return _stmt_text(A.seq(cont))


def snapshot(cfg: Configuration) -> Configuration:
    return cfg.with_(rollback=(cfg.permanent,) + cfg.rollback)


def revert(cfg: Configuration) -> Configuration:
    if not cfg.rollback:
        raise EmptyRollback("no open transaction to revert")
    return cfg.with_(permanent=cfg.rollback[0], rollback=cfg.rollback[1:])
