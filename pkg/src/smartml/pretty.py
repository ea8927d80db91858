"""Render ASTs back to SmartML source that re-parses to an equal AST."""
from __future__ import annotations

from . import ast as A

_INDENT = "    "


def _string(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def type_str(t: A.Type) -> str:
    return str(t)


def expr(e: A.Expr) -> str:
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.Field):
        return f"this.{e.name}"
    if isinstance(e, A.IntLit):
        return str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.StrLit):
        return _string(e.value)
    if isinstance(e, A.This):
        return "this"
    if isinstance(e, A.Sender):
        return "sender"
    if isinstance(e, A.Amount):
        return "<amount>"
    if isinstance(e, A.Not):
        return f"!{_atom(e.operand)}"
    if isinstance(e, (A.BinOp, A.BoolOp)):
        return f"{_atom(e.left)} {e.op} {_atom(e.right)}"
    if isinstance(e, A.New):
        return f"new {e.contract}({_args(e.args)})"
    if isinstance(e, A.DotCall):
        recv = _atom(e.receiver)
        if e.value is not None:
            return f"{recv}${_transfer_value(e.value)}.{e.name}({_args(e.args)})"
        return f"{recv}.{e.name}({_args(e.args)})"
    if isinstance(e, A.Proj):
        return f"{_atom(e.target)}.{e.name}"
    if isinstance(e, A.Apply):
        return f"{e.name}({_args(e.args)})"
    if isinstance(e, A.AdtCall):
        return f"{e.fn}({_args(e.args)})"
    if isinstance(e, A.AdtCons):
        return f"{e.ctor}({_args(e.args)})" if e.args else e.ctor
    raise TypeError(f"not an expression: {e!r}")


def _atom(e):
    text = expr(e)
    if isinstance(e, (A.BinOp, A.BoolOp)) or (isinstance(e, A.IntLit) and e.value < 0):
        return f"({text})"
    return text


def _transfer_value(e):
    if isinstance(e, A.IntLit) and e.value >= 0:
        return str(e.value)
    if isinstance(e, (A.Var, A.Field, A.Sender, A.Amount)):
        return expr(e)
    return f"({expr(e)})"


def _args(args):
    return ", ".join(expr(a) for a in args)


def _params(params):
    return ", ".join(f"{type_str(p.type)} {p.name}" for p in params)


def stmt_lines(s: A.Stmt, depth: int) -> list:
    pad = _INDENT * depth
    lines = []
    for st in A.flatten(s):
        if isinstance(st, A.Let) and st.decl_type is not None:
            lines.append(f"{pad}{type_str(st.decl_type)} {st.var} = {expr(st.rhs)};")
            lines.extend(stmt_lines(st.body, depth))
        else:
            lines.extend(_single(st, depth))
    return lines


def _block(s, depth):
    inner = stmt_lines(s, depth + 1)
    if not inner:
        return ["{ }"]
    return ["{"] + inner + [_INDENT * depth + "}"]


def _join(head, block_lines):
    """Attach a block to a header line."""
    return [head + " " + block_lines[0]] + block_lines[1:]


def _call_text(st):
    recv = _atom(st.receiver)
    if st.value is not None:
        text = f"{recv}${_transfer_value(st.value)}.{st.method}({_args(st.args)})"
    else:
        text = f"{recv}.{st.method}({_args(st.args)})"
    if isinstance(st, A.CallAssign):
        text = f"{expr(st.target)} = {text}"
    return text


def _single(st, depth):
    pad = _INDENT * depth
    if isinstance(st, A.If):
        lines = _join(f"{pad}if ({expr(st.cond)})", _block(st.then, depth))
        if st.orelse is not None:
            tail = _block(st.orelse, depth)
            lines[-1] = lines[-1] + " else " + tail[0]
            lines.extend(tail[1:])
        return lines
    if isinstance(st, A.While):
        return _join(f"{pad}while ({expr(st.cond)})", _block(st.body, depth))
    if isinstance(st, A.Let):
        return _join(f"{pad}let {st.var} := {expr(st.rhs)} in", _block(st.body, depth))
    if isinstance(st, A.Assert):
        return [f"{pad}assert({expr(st.cond)});"]
    if isinstance(st, A.Assign):
        return [f"{pad}{expr(st.target)} = {expr(st.rhs)};"]
    if isinstance(st, (A.Call, A.CallAssign)):
        return [f"{pad}{_call_text(st)};"]
    if isinstance(st, A.Return):
        return [f"{pad}return;"] if st.value is None else [f"{pad}return {expr(st.value)};"]
    if isinstance(st, A.Throw):
        return [f"{pad}throw {expr(st.value)};"]
    if isinstance(st, A.Hole):
        return [f"{pad}?;"] if st.target is None else [f"{pad}{expr(st.target)} = ?;"]
    if isinstance(st, A.Try):
        call = f"{expr(st.call.target)} = ?" if isinstance(st.call, A.Hole) and st.call.target else (
            "?" if isinstance(st.call, A.Hole) else _call_text(st.call))
        lines = [f"{pad}try {call};"]
        var = f" ({st.abort_var})" if st.abort_var else ""
        lines += _join(f"{pad}abort{var}", _block(st.abort, depth))
        lines += _join(f"{pad}success", _block(st.success, depth))
        return lines
    raise TypeError(f"not a statement: {st!r}")


def stmt(s: A.Stmt) -> str:
    return "\n".join(stmt_lines(s, 0))


def _dexpr_lines(d, depth):
    pad = _INDENT * depth
    if isinstance(d, A.DReturn):
        return [f"{pad}return {expr(d.value)};"]
    if isinstance(d, A.DLet):
        return [f"{pad}{type_str(d.decl_type)} {d.var} = {expr(d.value)};"] + _dexpr_lines(d.body, depth)
    if isinstance(d, A.DIf):
        return ([f"{pad}if ({expr(d.cond)}) {{"] + _dexpr_lines(d.then, depth + 1)
                + [f"{pad}}} else {{"] + _dexpr_lines(d.orelse, depth + 1) + [f"{pad}}}"])
    if isinstance(d, A.DSwitch):
        lines = [f"{pad}switch ({expr(d.scrutinee)}) {{"]
        for c in d.cases:
            if c.ctor is not None:
                binders = f"({', '.join(c.binders)})" if c.binders else ""
                head = f"case {c.ctor}{binders}:"
            else:
                head = f"case {expr(c.literal)}:"
            lines.append(f"{pad}{_INDENT}{head}")
            lines += _dexpr_lines(c.body, depth + 2)
        if d.default is not None:
            lines.append(f"{pad}{_INDENT}default:")
            lines += _dexpr_lines(d.default, depth + 2)
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"not an ADT expression: {d!r}")


def _adt_lines(a: A.AdtDecl):
    ctors = " | ".join(f"{c.name}({_params(c.params)})" if c.params else c.name for c in a.ctors)
    lines = [f"datatype {a.name} {{", f"{_INDENT}constructor {{ {ctors} }}"]
    for fn in a.functions:
        lines.append(f"{_INDENT}{type_str(fn.ret)} {fn.name}({_params(fn.params)}) {{")
        lines += _dexpr_lines(fn.body, 2)
        lines.append(f"{_INDENT}}}")
    lines.append("}")
    return lines


def _contract_lines(c: A.ContractDecl):
    head = f"contract {c.name}" + (f" extends {c.parent}" if c.parent else "")
    lines = [head + " {"]
    for f in c.fields:
        prefix = "irrelevant " if f.irrelevant else ""
        lines.append(f"{_INDENT}{prefix}{type_str(f.type)} {f.name};")
    k = c.constructor
    if k is not None:
        lines.append(f"{_INDENT}constructor({_params(k.params)}) {{")
        if k.super_args is not None:
            lines.append(f"{_INDENT * 2}super({_args(k.super_args)});")
        for name, rhs in k.inits:
            lines.append(f"{_INDENT * 2}this.{name} = {expr(rhs)};")
        lines.append(f"{_INDENT}}}")
    for m in c.methods:
        head = "function" if m.ret == A.UNIT else type_str(m.ret)
        lines += _join(f"{_INDENT}{head} {m.name}({_params(m.params)})", _block(m.body, 1))
    lines.append("}")
    return lines


def pretty_print(program: A.Program) -> str:
    """Source text for ``program``; ``parse_program`` of it gives back an equal AST."""
    chunks = [_adt_lines(a) for a in program.adts] + [_contract_lines(c) for c in program.contracts]
    return "\n\n".join("\n".join(ch) for ch in chunks) + ("\n" if chunks else "")
