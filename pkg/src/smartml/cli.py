"""``smartml`` command line: parse, check, run and monitor ``.sml`` files."""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import ast as A
from .interpreter import Aborted, ConstructorError, FuelExhausted, Machine, Stuck, Terminated, result_json
from .monitor import UNSAFE, classify_trace, combine, monitor_program, report_json
from .parser import ParseError, parse_program
from .pretty import pretty_print
from .resolve import NameResolutionError, resolve
from .runtime import PermanentMemory, Ref, canonical, show, value_to_json
from .typesys import check_program

SCHEMA = "smartml/1"
EXIT_OK, EXIT_FAIL, EXIT_IO, EXIT_ABORTED, EXIT_STUCK, EXIT_FUEL = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message, code=EXIT_FAIL):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ output

def _color_on(stream):
    return os.environ.get("SMARTML_COLOR", "1") != "0" and hasattr(stream, "isatty") and stream.isatty()


def _paint(text, good, stream=None):
    stream = stream or sys.stdout
    if not _color_on(stream):
        return text
    return f"\033[{32 if good else 31}m{text}\033[0m"


def _emit(obj):
    print(json.dumps(obj, sort_keys=True, ensure_ascii=False))


def ast_json(node):
    """Generic JSON form of an AST node (source positions omitted)."""
    if isinstance(node, (list, tuple)):
        return [ast_json(n) for n in node]
    if dataclasses.is_dataclass(node):
        d = {"node": type(node).__name__}
        for f in dataclasses.fields(node):
            if f.name != "loc":
                d[f.name] = ast_json(getattr(node, f.name))
        return d
    if isinstance(node, A.Type) or not isinstance(node, (int, str, bool, type(None))):
        return str(node)
    return node


# ------------------------------------------------------------------- input

def _read(files):
    chunks = []
    for path in files:
        try:
            with open(path, encoding="utf-8") as fh:
                chunks.append(fh.read())
        except OSError as exc:
            raise CliError(f"{path}: {exc.strerror or exc}", EXIT_IO) from None
    return "\n".join(chunks)


def _load(files):
    source = _read(files)
    try:
        program = parse_program(source)
        return program, resolve(program)
    except (ParseError, NameResolutionError) as exc:
        raise CliError(f"error: {exc}") from None


def parse_literal(text: str):
    """Value of a ``--arg`` literal: int, true/false, "string" or #id."""
    t = text.strip()
    if t in ("true", "false"):
        return t == "true"
    if t.startswith("#") and t[1:].isdigit():
        return Ref(int(t[1:]))
    if len(t) >= 2 and t[0] == t[-1] == '"':
        return json.loads(t)
    try:
        return int(t)
    except ValueError:
        raise CliError(f"cannot read argument {text!r}") from None


def _entry(resolved, text):
    if not text or "." not in text:
        raise CliError("--entry must be Contract.method")
    c, m = text.split(".", 1)
    if c not in resolved.contracts or resolved.lookup_method(c, m) is None:
        raise CliError(f"unknown entry {text}")
    return c, m


def _require_checked(resolved, unsafe):
    if unsafe:
        return
    reports = check_program(resolved)
    bad = [r for r in reports.values() if not r.ok]
    if bad:
        lines = [str(f) for r in bad for f in r.failures]
        raise CliError("program rejected by the reentrance checker (use --unsafe to run anyway):\n  "
                       + "\n  ".join(lines))


def _prepare(resolved, entry, args):
    """Deploy the entry contract and build the initial configuration."""
    c, m = _entry(resolved, entry)
    values = [parse_literal(a) for a in args]
    n_ctor = len(resolved.constructor_params(c))
    n_meth = len(resolved.lookup_method(c, m)[1].params)
    if len(values) != n_ctor + n_meth:
        raise CliError(f"{c} needs {n_ctor} constructor and {n_meth} method arguments, got {len(values)}")
    machine = Machine(resolved)
    try:
        pm, inst = machine.exec_constructor(PermanentMemory(), c, tuple(values[:n_ctor]))
        cfg = machine.initial(pm, inst, m, tuple(values[n_ctor:]))
    except (ConstructorError, ValueError, KeyError) as exc:
        raise CliError(f"cannot start {entry}: {exc}") from None
    except Exception as exc:  # a throw inside the constructor
        raise CliError(f"constructor of {c} failed: {exc}") from None
    return machine, cfg


_EXIT_BY_OUTCOME = {Terminated: EXIT_OK, Aborted: EXIT_ABORTED, Stuck: EXIT_STUCK, FuelExhausted: EXIT_FUEL}


# ---------------------------------------------------------------- commands

def cmd_parse(opts):
    program, _ = _load(opts.files)
    if opts.format == "json":
        _emit({"schema": SCHEMA, "program": ast_json(program)})
    else:
        sys.stdout.write(pretty_print(program))
    return EXIT_OK


def cmd_check(opts):
    _, resolved = _load(opts.files)
    reports = check_program(resolved, explain=opts.explain)
    ok = all(r.ok for r in reports.values())
    if opts.format == "json":
        _emit({"schema": SCHEMA, "ok": ok, "contracts": [r.to_json() for r in reports.values()]})
    else:
        for r in reports.values():
            print(f"{r.contract}: {_paint(r.verdict, r.ok)}")
            for f in r.failures:
                print(f"  {f}")
                if f.trail:
                    print(f"    via {' -> '.join(f.trail)}")
            if opts.explain and r.derivation:
                for d in r.derivation:
                    print("\n".join("    " + line for line in d.render()))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(opts):
    _, resolved = _load(opts.files)
    _require_checked(resolved, opts.unsafe)
    machine, cfg = _prepare(resolved, opts.entry, opts.arg)
    res = machine.run(cfg, opts.fuel)
    out = res.outcome
    if opts.format == "json":
        head = {"schema": SCHEMA, **result_json(res)}
        head["permanent"] = res.config.permanent.to_json()
        print(canonical(head))
        for e in res.trace:
            print(canonical(e.to_json()))
    else:
        if isinstance(out, Terminated):
            print(show(out.value))
        elif isinstance(out, Aborted):
            print(_paint(f"aborted: {show(out.error)}", False))
        elif isinstance(out, Stuck):
            print(_paint(f"stuck: {out.reason}", False))
        else:
            print(_paint(f"fuel exhausted after {res.steps} steps", False))
        if opts.explain:
            for e in res.trace:
                print("  " + canonical(e.to_json()))
    return _EXIT_BY_OUTCOME[type(out)]


def cmd_monitor(opts):
    _, resolved = _load(opts.files)
    _require_checked(resolved, opts.unsafe)
    if opts.fuzz:
        entry = _entry(resolved, opts.entry) if opts.entry else None
        pairs = monitor_program(resolved, opts.seed, opts.budget, min(opts.fuel, 5000), entry)
        report = report_json(pairs)
        verdicts = [v for _, v in pairs]
    else:
        if not opts.entry:
            raise CliError("monitor needs --entry or --fuzz")
        machine, cfg = _prepare(resolved, opts.entry, opts.arg)
        res = machine.run(cfg, opts.fuel)
        verdict = classify_trace(res.trace, resolved)
        verdicts = [verdict]
        report = {"schema": "smartml.monitor/1", "level": verdict.level,
                  "runs": [{"case": opts.entry, "outcome": type(res.outcome).__name__,
                            "verdict": verdict.to_json()}]}
    level = combine(verdicts) if verdicts else "StrictSafe"
    report["level"] = level
    if opts.format == "json":
        _emit(report)
    else:
        print(f"{len(verdicts)} trace(s): {_paint(level, level != UNSAFE)}")
        counts = {}
        for v in verdicts:
            counts[v.level] = counts.get(v.level, 0) + 1
        for name, n in sorted(counts.items()):
            print(f"  {name}: {n}")
        if opts.explain:
            for v in verdicts:
                if v.witnesses:
                    print()
                    print(v.explain())
    return EXIT_FAIL if level == UNSAFE else EXIT_OK


# ------------------------------------------------------------------ parser

def _positive(text):
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="smartml", description="SmartML toolkit: parse, check, run, monitor.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("parse", "parse and pretty-print"), ("check", "reentrance type check"),
                           ("run", "execute an entry method"), ("monitor", "classify runs for reentrance")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("files", nargs="+")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--explain", action="store_true")
        if name in ("run", "monitor"):
            sp.add_argument("--entry", help="Contract.method")
            sp.add_argument("--arg", action="append", default=[],
                            help="literal argument; constructor arguments come first")
            sp.add_argument("--fuel", type=_positive, default=100000)
            sp.add_argument("--unsafe", action="store_true", help="skip the checker gate")
        if name == "monitor":
            sp.add_argument("--fuzz", action="store_true")
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--budget", type=_positive, default=100)
    return p


_COMMANDS = {"parse": cmd_parse, "check": cmd_check, "run": cmd_run, "monitor": cmd_monitor}


def main(argv=None) -> int:
    opts = build_parser().parse_args(argv)
    if opts.command == "run" and not opts.entry:
        print("error: run needs --entry", file=sys.stderr)
        return EXIT_FAIL
    try:
        return _COMMANDS[opts.command](opts)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
