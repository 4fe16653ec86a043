"""Bit-blasting: lower a word-level netlist to an all-width-1 netlist.

The result is a regular Netlist whose signals all have width 1 and
whose expressions use only {ref, const, and, not, xor, mux}. Bit i of a
word signal `sig` is named `sig[i]` (LSB first); width-1 signals keep
their name, so blasting an already bit-level netlist is a fixpoint.

Adders are expanded ripple-carry, mul as shift-and-add over masked
partial products, ult as an MSB-first compare chain. slice/concat are
pure rewiring and introduce no gates. Shared subtrees stay shared as
Python objects, so downstream consumers (Tseitin encoding, memoized
evaluation) see a DAG, not an exponential tree.
"""

from __future__ import annotations

from .expr import Expr, WidthError, const, expr_width
from .netlist import (
    BoxDecl,
    BoxPortIn,
    BoxPortOut,
    Netlist,
    Port,
    Register,
)

FALSE = const(1, 0)
TRUE = const(1, 1)


def bit_name(name: str, i: int, width: int) -> str:
    return name if width == 1 else "%s[%d]" % (name, i)


def _band(a, b):
    if a is FALSE or b is FALSE:
        return FALSE
    if a is TRUE:
        return b
    if b is TRUE:
        return a
    return Expr("and", args=(a, b))


def _bnot(a):
    if a is FALSE:
        return TRUE
    if a is TRUE:
        return FALSE
    if a.op == "not":
        return a.args[0]
    return Expr("not", args=(a,))


def _bxor(a, b):
    if a is FALSE:
        return b
    if b is FALSE:
        return a
    if a is TRUE:
        return _bnot(b)
    if b is TRUE:
        return _bnot(a)
    return Expr("xor", args=(a, b))


def _bor(a, b):
    return _bnot(_band(_bnot(a), _bnot(b)))


def _bmux(c, t, f):
    if c is TRUE:
        return t
    if c is FALSE:
        return f
    return Expr("mux", args=(c, t, f))


def _adder(abits, bbits, carry_in):
    """Ripple-carry sum bits of equal-width vectors."""
    out = []
    c = carry_in
    for a, b in zip(abits, bbits):
        axb = _bxor(a, b)
        out.append(_bxor(axb, c))
        # carry-out: (a & b) | (c & (a ^ b)); the two terms are disjoint
        c = _bxor(_band(a, b), _band(c, axb))
    return out


def _blast(e: Expr, env, memo) -> list[Expr]:
    """Lower e to a list of 1-bit exprs, LSB first."""
    key = id(e)
    got = memo.get(key)
    if got is not None:
        return got
    bits = _blast_inner(e, env, memo)
    memo[key] = bits
    return bits


def _blast_inner(e, env, memo):
    if e.op == "ref":
        w = env[e.name]
        return [Expr("ref", name=bit_name(e.name, i, w)) for i in range(w)]
    if e.op == "const":
        return [TRUE if (e.value >> i) & 1 else FALSE for i in range(e.width_)]
    if e.op == "not":
        return [_bnot(a) for a in _blast(e.args[0], env, memo)]
    if e.op in ("and", "or", "xor"):
        xs = _blast(e.args[0], env, memo)
        ys = _blast(e.args[1], env, memo)
        f = {"and": _band, "or": _bor, "xor": _bxor}[e.op]
        return [f(a, b) for a, b in zip(xs, ys)]
    if e.op == "add":
        return _adder(_blast(e.args[0], env, memo), _blast(e.args[1], env, memo), FALSE)
    if e.op == "sub":
        # a - b = a + ~b + 1
        xs = _blast(e.args[0], env, memo)
        ys = [_bnot(b) for b in _blast(e.args[1], env, memo)]
        return _adder(xs, ys, TRUE)
    if e.op == "mul":
        xs = _blast(e.args[0], env, memo)
        ys = _blast(e.args[1], env, memo)
        w = len(xs)
        acc = [FALSE] * w
        for i, y in enumerate(ys):
            partial = [FALSE] * i + [_band(x, y) for x in xs[: w - i]]
            acc = _adder(acc, partial, FALSE)
        return acc
    if e.op == "eq":
        xs = _blast(e.args[0], env, memo)
        ys = _blast(e.args[1], env, memo)
        r = TRUE
        for a, b in zip(xs, ys):
            r = _band(r, _bnot(_bxor(a, b)))
        return [r]
    if e.op == "ult":
        xs = _blast(e.args[0], env, memo)
        ys = _blast(e.args[1], env, memo)
        # From MSB down: the first differing bit decides; a<b iff that
        # bit of b is set.
        r = FALSE
        for a, b in zip(xs, ys):  # LSB to MSB, so r accumulates "lower bits say"
            r = _bmux(_bxor(a, b), b, r)
        return [r]
    if e.op == "mux":
        (c,) = _blast(e.args[0], env, memo)
        ts = _blast(e.args[1], env, memo)
        fs = _blast(e.args[2], env, memo)
        return [_bmux(c, t, f) for t, f in zip(ts, fs)]
    if e.op == "shl":
        xs = _blast(e.args[0], env, memo)
        k = min(e.amount, len(xs))
        return [FALSE] * k + xs[: len(xs) - k]
    if e.op == "shr":
        xs = _blast(e.args[0], env, memo)
        k = min(e.amount, len(xs))
        return xs[k:] + [FALSE] * k
    if e.op == "slice":
        xs = _blast(e.args[0], env, memo)
        return xs[e.lo : e.hi + 1]
    if e.op == "concat":
        hi = _blast(e.args[0], env, memo)
        lo = _blast(e.args[1], env, memo)
        return lo + hi
    raise WidthError("unknown operator %r" % e.op, e)


def blast_expr(e: Expr, env) -> list[Expr]:
    """Public helper: lower one word-level expression (constraints etc.)."""
    return _blast(e, env, {})


def bitblast(n: Netlist) -> Netlist:
    """Lower a validated netlist; see module docstring for the naming scheme."""
    env = n.widths()
    memo = {}

    def bits_of(name, width):
        return [bit_name(name, i, width) for i in range(width)]

    bn = Netlist(name=n.name)
    for p in n.inputs:
        bn.inputs += [Port(b, 1, p.role) for b in bits_of(p.name, p.width)]
    for p in n.outputs:
        bn.outputs += [Port(b, 1, p.role) for b in bits_of(p.name, p.width)]
    for r in n.regs:
        for i, b in enumerate(bits_of(r.name, r.width)):
            init = None if r.init is None else (r.init >> i) & 1
            bn.regs.append(Register(b, 1, init))
    for name, w, e in n.wires:
        bexprs = _blast(e, env, memo)
        for b, be in zip(bits_of(name, w), bexprs):
            bn.wires.append((b, 1, be))
    for rname, e in n.next_fns.items():
        w = env[rname]
        for b, be in zip(bits_of(rname, w), _blast(e, env, memo)):
            bn.next_fns[b] = be
    for oname, e in n.drive_fns.items():
        w = {p.name: p.width for p in n.outputs}[oname]
        for b, be in zip(bits_of(oname, w), _blast(e, env, memo)):
            bn.drive_fns[b] = be
    for box in n.boxes:
        ins = []
        for bi in box.inputs:
            w = expr_width(bi.expr, env)
            for i, be in enumerate(_blast(bi.expr, env, memo)):
                ins.append(BoxPortIn(bit_name(bi.name, i, w), be, bi.role))
        outs = []
        for bo in box.outputs:
            for b in bits_of(bo.name, bo.width):
                outs.append(BoxPortOut(b, 1, bo.role))
        bn.boxes.append(BoxDecl(box.name, tuple(ins), tuple(outs)))
    for s in n.observations:
        bn.observations += bits_of(s, env[s])
    return bn
