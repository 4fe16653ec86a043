"""Word-level expression trees for the netlist IR.

Expressions are immutable and carry no width themselves; widths are
computed bottom-up against a signal-width environment.  The width rules
are deliberately strict: bitwise and arithmetic operators require equal
operand widths, comparisons return width 1, shifts take a compile-time
literal amount, and mul keeps only the low half.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping


class WidthError(ValueError):
    """Raised when an expression violates the width rules."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


# Operator arities. "shift" ops carry a literal amount, "slice" carries
# hi/lo bounds. mux is (cond, then, else).
UNARY_OPS = frozenset({"not"})
BINARY_OPS = frozenset({"and", "or", "xor", "add", "sub", "mul", "eq", "ult", "concat"})
SHIFT_OPS = frozenset({"shl", "shr"})
ALL_OPS = UNARY_OPS | BINARY_OPS | SHIFT_OPS | frozenset({"mux", "slice", "const", "ref"})


@dataclass(frozen=True)
class Expr:
    """One node of an expression tree.

    op is one of: ref, const, not, and, or, xor, add, sub, mul, eq, ult,
    mux, shl, shr, slice, concat.  Payload fields:
      ref:    name
      const:  width, value
      shl/shr: args=(e,), amount
      slice:  args=(e,), hi, lo
      others: args tuple
    """

    op: str
    args: tuple = ()
    name: str | None = None
    width_: int | None = None  # const only
    value: int | None = None  # const only
    amount: int | None = None  # shl/shr
    hi: int | None = None  # slice
    lo: int | None = None  # slice

    def children(self):
        return self.args

    def __str__(self):
        return pretty_expr(self)


def ref(name: str) -> Expr:
    return Expr("ref", name=name)


def const(width: int, value: int) -> Expr:
    if width < 1:
        raise WidthError("const width must be >= 1")
    if not 0 <= value < (1 << width):
        raise WidthError("const value %d does not fit in width %d" % (value, width))
    return Expr("const", width_=width, value=value)


def enot(a: Expr) -> Expr:
    return Expr("not", args=(a,))


def eand(a: Expr, b: Expr) -> Expr:
    return Expr("and", args=(a, b))


def eor(a: Expr, b: Expr) -> Expr:
    return Expr("or", args=(a, b))


def exor(a: Expr, b: Expr) -> Expr:
    return Expr("xor", args=(a, b))


def eadd(a: Expr, b: Expr) -> Expr:
    return Expr("add", args=(a, b))


def esub(a: Expr, b: Expr) -> Expr:
    return Expr("sub", args=(a, b))


def emul(a: Expr, b: Expr) -> Expr:
    return Expr("mul", args=(a, b))


def eeq(a: Expr, b: Expr) -> Expr:
    return Expr("eq", args=(a, b))


def eult(a: Expr, b: Expr) -> Expr:
    return Expr("ult", args=(a, b))


def emux(c: Expr, a: Expr, b: Expr) -> Expr:
    return Expr("mux", args=(c, a, b))


def eshl(a: Expr, amount: int) -> Expr:
    return Expr("shl", args=(a,), amount=amount)


def eshr(a: Expr, amount: int) -> Expr:
    return Expr("shr", args=(a,), amount=amount)


def eslice(a: Expr, hi: int, lo: int) -> Expr:
    return Expr("slice", args=(a,), hi=hi, lo=lo)


def econcat(a: Expr, b: Expr) -> Expr:
    """Concatenation; a supplies the high bits, b the low bits."""
    return Expr("concat", args=(a, b))


def expr_width(e: Expr, env: Mapping[str, int]) -> int:
    """Compute the width of e against env (signal name -> width).

    Raises WidthError naming the offending node when the rules are
    violated or a referenced signal is unknown.
    """
    if e.op == "ref":
        try:
            return env[e.name]
        except KeyError:
            raise WidthError("unknown signal %r" % e.name, e) from None
    if e.op == "const":
        return e.width_
    if e.op == "not":
        return expr_width(e.args[0], env)
    if e.op in ("and", "or", "xor", "add", "sub", "mul"):
        wa = expr_width(e.args[0], env)
        wb = expr_width(e.args[1], env)
        if wa != wb:
            raise WidthError(
                "operands of (%s ...) have widths %d and %d" % (e.op, wa, wb), e
            )
        return wa
    if e.op in ("eq", "ult"):
        wa = expr_width(e.args[0], env)
        wb = expr_width(e.args[1], env)
        if wa != wb:
            raise WidthError(
                "operands of (%s ...) have widths %d and %d" % (e.op, wa, wb), e
            )
        return 1
    if e.op == "mux":
        wc = expr_width(e.args[0], env)
        if wc != 1:
            raise WidthError("mux condition must have width 1, got %d" % wc, e)
        wa = expr_width(e.args[1], env)
        wb = expr_width(e.args[2], env)
        if wa != wb:
            raise WidthError(
                "mux branches have widths %d and %d" % (wa, wb), e
            )
        return wa
    if e.op in ("shl", "shr"):
        if e.amount < 0:
            raise WidthError("negative shift amount", e)
        return expr_width(e.args[0], env)
    if e.op == "slice":
        wa = expr_width(e.args[0], env)
        if not (0 <= e.lo <= e.hi < wa):
            raise WidthError(
                "slice [%d:%d] out of range for width %d" % (e.hi, e.lo, wa), e
            )
        return e.hi - e.lo + 1
    if e.op == "concat":
        return expr_width(e.args[0], env) + expr_width(e.args[1], env)
    raise WidthError("unknown operator %r" % e.op, e)


def eval_expr(e: Expr, env: Mapping[str, int], values: Mapping[str, int]) -> int:
    """Reference interpreter: evaluate e, widths per env, signals per values."""
    if e.op == "ref":
        return values[e.name]
    if e.op == "const":
        return e.value
    if e.op == "not":
        w = expr_width(e.args[0], env)
        return (~eval_expr(e.args[0], env, values)) & ((1 << w) - 1)
    if e.op == "and":
        return eval_expr(e.args[0], env, values) & eval_expr(e.args[1], env, values)
    if e.op == "or":
        return eval_expr(e.args[0], env, values) | eval_expr(e.args[1], env, values)
    if e.op == "xor":
        return eval_expr(e.args[0], env, values) ^ eval_expr(e.args[1], env, values)
    if e.op == "add":
        w = expr_width(e.args[0], env)
        return (eval_expr(e.args[0], env, values) + eval_expr(e.args[1], env, values)) & (
            (1 << w) - 1
        )
    if e.op == "sub":
        w = expr_width(e.args[0], env)
        return (eval_expr(e.args[0], env, values) - eval_expr(e.args[1], env, values)) & (
            (1 << w) - 1
        )
    if e.op == "mul":
        w = expr_width(e.args[0], env)
        return (eval_expr(e.args[0], env, values) * eval_expr(e.args[1], env, values)) & (
            (1 << w) - 1
        )
    if e.op == "eq":
        return int(
            eval_expr(e.args[0], env, values) == eval_expr(e.args[1], env, values)
        )
    if e.op == "ult":
        return int(
            eval_expr(e.args[0], env, values) < eval_expr(e.args[1], env, values)
        )
    if e.op == "mux":
        c = eval_expr(e.args[0], env, values)
        return eval_expr(e.args[1 if c else 2], env, values)
    if e.op == "shl":
        w = expr_width(e.args[0], env)
        return (eval_expr(e.args[0], env, values) << e.amount) & ((1 << w) - 1)
    if e.op == "shr":
        return eval_expr(e.args[0], env, values) >> e.amount
    if e.op == "slice":
        v = eval_expr(e.args[0], env, values)
        return (v >> e.lo) & ((1 << (e.hi - e.lo + 1)) - 1)
    if e.op == "concat":
        wb = expr_width(e.args[1], env)
        return (eval_expr(e.args[0], env, values) << wb) | eval_expr(
            e.args[1], env, values
        )
    raise ValueError("unknown operator %r" % e.op)


def expr_refs(e: Expr) -> set[str]:
    """All signal names referenced by e. Shared subtrees (expressions are
    DAGs after bit-blasting) are visited once."""
    out = set()
    seen = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if n.op == "ref":
            out.add(n.name)
        else:
            stack.extend(n.args)
    return out


def pretty_expr(e: Expr) -> str:
    if e.op == "ref":
        return e.name
    if e.op == "const":
        return "(const %d %d)" % (e.width_, e.value)
    if e.op in ("shl", "shr"):
        return "(%s %s %d)" % (e.op, pretty_expr(e.args[0]), e.amount)
    if e.op == "slice":
        return "(slice %s %d %d)" % (pretty_expr(e.args[0]), e.hi, e.lo)
    return "(%s %s)" % (e.op, " ".join(pretty_expr(a) for a in e.args))
