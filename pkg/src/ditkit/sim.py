"""Cycle-accurate reference simulation.

Two engines share the same semantics:

* simulate() is the plain interpretive reference, used as the replay and
  equivalence oracle. Registers update simultaneously at cycle
  boundaries from next functions evaluated on pre-update values.
* BatchSim evaluates many independent runs at once on numpy uint64
  vectors (widths up to 64). It exists purely for throughput in the
  random/exhaustive oracles and is cross-checked against simulate().

Trace value convention: registers carry the value *entering* each
cycle, wires and outputs the value computed *during* the cycle, inputs
the applied value. Box outputs are caller-provided stimuli; box inputs
are recorded under "<box>.<port>".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Expr
from .netlist import Netlist


class SimulationError(ValueError):
    pass


class _Eval:
    """Memoizing word-level evaluator. Value memos are per cycle, width
    memos persist; both are keyed on node identity so shared subtrees of
    bit-blasted DAGs are computed once."""

    def __init__(self, env):
        self.env = env
        self.wmemo: dict[int, int] = {}

    def width(self, e: Expr) -> int:
        w = self.wmemo.get(id(e))
        if w is not None:
            return w
        if e.op == "ref":
            w = self.env[e.name]
        elif e.op == "const":
            w = e.width_
        elif e.op in ("not", "shl", "shr", "add", "sub", "mul", "and", "or", "xor"):
            w = self.width(e.args[0])
        elif e.op in ("eq", "ult"):
            self.width(e.args[0])
            w = 1
        elif e.op == "mux":
            w = self.width(e.args[1])
        elif e.op == "slice":
            self.width(e.args[0])
            w = e.hi - e.lo + 1
        elif e.op == "concat":
            w = self.width(e.args[0]) + self.width(e.args[1])
        else:
            raise ValueError("unknown operator %r" % e.op)
        self.wmemo[id(e)] = w
        return w

    def eval(self, e: Expr, values, memo) -> int:
        v = memo.get(id(e))
        if v is not None:
            return v
        op = e.op
        if op == "ref":
            v = values[e.name]
        elif op == "const":
            v = e.value
        elif op == "not":
            v = ~self.eval(e.args[0], values, memo) & ((1 << self.width(e)) - 1)
        elif op == "and":
            v = self.eval(e.args[0], values, memo) & self.eval(e.args[1], values, memo)
        elif op == "or":
            v = self.eval(e.args[0], values, memo) | self.eval(e.args[1], values, memo)
        elif op == "xor":
            v = self.eval(e.args[0], values, memo) ^ self.eval(e.args[1], values, memo)
        elif op == "add":
            v = (self.eval(e.args[0], values, memo) + self.eval(e.args[1], values, memo)) & (
                (1 << self.width(e)) - 1
            )
        elif op == "sub":
            v = (self.eval(e.args[0], values, memo) - self.eval(e.args[1], values, memo)) & (
                (1 << self.width(e)) - 1
            )
        elif op == "mul":
            v = (self.eval(e.args[0], values, memo) * self.eval(e.args[1], values, memo)) & (
                (1 << self.width(e)) - 1
            )
        elif op == "eq":
            v = int(self.eval(e.args[0], values, memo) == self.eval(e.args[1], values, memo))
        elif op == "ult":
            v = int(self.eval(e.args[0], values, memo) < self.eval(e.args[1], values, memo))
        elif op == "mux":
            c = self.eval(e.args[0], values, memo)
            v = self.eval(e.args[1 if c else 2], values, memo)
        elif op == "shl":
            v = (self.eval(e.args[0], values, memo) << e.amount) & ((1 << self.width(e)) - 1)
        elif op == "shr":
            v = self.eval(e.args[0], values, memo) >> e.amount
        elif op == "slice":
            v = (self.eval(e.args[0], values, memo) >> e.lo) & ((1 << (e.hi - e.lo + 1)) - 1)
        elif op == "concat":
            wb = self.width(e.args[1])
            v = (self.eval(e.args[0], values, memo) << wb) | self.eval(e.args[1], values, memo)
        else:
            raise ValueError("unknown operator %r" % op)
        memo[id(e)] = v
        return v


@dataclass
class Trace:
    length: int
    values: dict[str, list[int]] = field(default_factory=dict)
    final_regs: dict[str, int] = field(default_factory=dict)

    def at(self, name: str, cycle: int) -> int:
        return self.values[name][cycle]


def _box_input_name(box, port):
    return "%s.%s" % (box, port)


def simulate(
    n: Netlist,
    init_override: dict[str, int] | None = None,
    inputs: list[dict[str, int]] | None = None,
    box_outputs: list[dict[str, int]] | None = None,
    default_uninit: int | None = None,
) -> Trace:
    """Run the design for len(inputs) cycles and record every signal.

    init_override maps register names to starting values; registers with
    an init value default to it. Uninitialized registers must be covered
    by init_override or default_uninit. Each per-cycle input map must
    cover all inputs; box_outputs likewise covers all box output
    signals for designs with boxes.
    """
    inputs = inputs or []
    init_override = init_override or {}
    env = n.widths()
    length = len(inputs)

    state = {}
    for r in n.regs:
        if r.name in init_override:
            state[r.name] = init_override[r.name]
        elif r.init is not None:
            state[r.name] = r.init
        elif default_uninit is not None:
            state[r.name] = default_uninit
        else:
            raise SimulationError(
                "register %r is uninitialized and has no override" % r.name
            )
        if not 0 <= state[r.name] < (1 << r.width):
            raise SimulationError("initial value of %r does not fit" % r.name)

    box_out_names = [o.name for o in n.box_output_signals()]
    if box_out_names and box_outputs is None and length > 0:
        raise SimulationError("design has boxes; box output stimuli required")

    trace = Trace(length=length)
    rec = trace.values
    names = (
        [p.name for p in n.inputs]
        + [r.name for r in n.regs]
        + [w for w, _, _ in n.wires]
        + [p.name for p in n.outputs]
        + box_out_names
        + [_box_input_name(b.name, i.name) for b in n.boxes for i in b.inputs]
    )
    for name in names:
        rec[name] = []

    order = n.wire_order()
    wire_exprs = {name: e for name, _, e in n.wires}
    ev = _Eval(env)

    for t in range(length):
        values = dict(state)
        memo = {}
        for p in n.inputs:
            try:
                v = inputs[t][p.name]
            except KeyError:
                raise SimulationError(
                    "missing value for input %r at cycle %d" % (p.name, t)
                ) from None
            if not 0 <= v < (1 << p.width):
                raise SimulationError("input %r value %d does not fit" % (p.name, v))
            values[p.name] = v
        for o in n.box_output_signals():
            try:
                values[o.name] = box_outputs[t][o.name]
            except (KeyError, TypeError, IndexError):
                raise SimulationError(
                    "missing value for box output %r at cycle %d" % (o.name, t)
                ) from None
        for name in order:
            values[name] = ev.eval(wire_exprs[name], values, memo)
        for p in n.outputs:
            values[p.name] = ev.eval(n.drive_fns[p.name], values, memo)
        for b in n.boxes:
            for i in b.inputs:
                values[_box_input_name(b.name, i.name)] = ev.eval(i.expr, values, memo)

        for r in n.regs:
            rec[r.name].append(state[r.name])
        for name in names:
            if name in state:
                continue
            rec[name].append(values[name])

        state = {r.name: ev.eval(n.next_fns[r.name], values, memo) for r in n.regs}

    trace.final_regs = dict(state)
    return trace


# ---------------------------------------------------------------------------
# Vectorized batch simulation


_U64 = np.uint64


def _mask(width):
    return _U64((1 << width) - 1) if width < 64 else _U64(0xFFFFFFFFFFFFFFFF)


class BatchSim:
    """Evaluate a netlist on numpy vectors, one lane per independent run.

    All signal widths must be <= 64. Lane k of every array belongs to
    run k; step() advances all runs by one cycle.
    """

    def __init__(self, n: Netlist, lanes: int):
        self.n = n
        self.lanes = lanes
        self.env = n.widths()
        for name, w in self.env.items():
            if w > 64:
                raise SimulationError("batch simulation caps widths at 64 (%s)" % name)
        self.order = n.wire_order()
        self.wire_exprs = {name: e for name, _, e in n.wires}
        self.box_out_names = [o.name for o in n.box_output_signals()]
        self.state: dict[str, np.ndarray] = {}
        self._wcache: dict[int, int] = {}

    def reset(self, init_override: dict[str, np.ndarray] | None = None):
        init_override = init_override or {}
        for r in self.n.regs:
            if r.name in init_override:
                v = np.asarray(init_override[r.name], dtype=_U64)
                if v.shape != (self.lanes,):
                    v = np.broadcast_to(v, (self.lanes,)).copy()
            elif r.init is not None:
                v = np.full(self.lanes, r.init, dtype=_U64)
            else:
                raise SimulationError(
                    "register %r is uninitialized and has no override" % r.name
                )
            self.state[r.name] = v
        return self

    def _eval(self, e, values):
        if e.op == "ref":
            return values[e.name]
        if e.op == "const":
            return np.full(self.lanes, e.value, dtype=_U64)
        a = self._eval(e.args[0], values) if e.args else None
        if e.op == "not":
            w = self._width(e.args[0])
            return (~a) & _mask(w)
        if e.op in ("shl", "shr"):
            w = self._width(e.args[0])
            if e.op == "shl":
                return (a << _U64(e.amount)) & _mask(w) if e.amount < 64 else np.zeros(self.lanes, dtype=_U64)
            return a >> _U64(e.amount) if e.amount < 64 else np.zeros(self.lanes, dtype=_U64)
        if e.op == "slice":
            return (a >> _U64(e.lo)) & _mask(e.hi - e.lo + 1)
        if e.op == "mux":
            t = self._eval(e.args[1], values)
            f = self._eval(e.args[2], values)
            return np.where(a.astype(bool), t, f)
        b = self._eval(e.args[1], values)
        if e.op == "and":
            return a & b
        if e.op == "or":
            return a | b
        if e.op == "xor":
            return a ^ b
        if e.op == "add":
            return (a + b) & _mask(self._width(e.args[0]))
        if e.op == "sub":
            return (a - b) & _mask(self._width(e.args[0]))
        if e.op == "mul":
            return (a * b) & _mask(self._width(e.args[0]))
        if e.op == "eq":
            return (a == b).astype(_U64)
        if e.op == "ult":
            return (a < b).astype(_U64)
        if e.op == "concat":
            wb = self._width(e.args[1])
            return ((a << _U64(wb)) | b) & _mask(self._width(e.args[0]) + wb)
        raise ValueError("unknown operator %r" % e.op)

    def _width(self, e):
        w = self._wcache.get(id(e))
        if w is None:
            from .expr import expr_width

            w = expr_width(e, self.env)
            self._wcache[id(e)] = w
        return w

    def step(self, inputs: dict[str, np.ndarray], box_outputs: dict[str, np.ndarray] | None = None):
        """Advance one cycle; returns the full combinational valuation."""
        values = dict(self.state)
        for p in self.n.inputs:
            values[p.name] = np.asarray(inputs[p.name], dtype=_U64)
        for name in self.box_out_names:
            values[name] = np.asarray(box_outputs[name], dtype=_U64)
        for name in self.order:
            values[name] = self._eval(self.wire_exprs[name], values)
        for p in self.n.outputs:
            values[p.name] = self._eval(self.n.drive_fns[p.name], values)
        self.state = {
            r.name: self._eval(self.n.next_fns[r.name], values) for r in self.n.regs
        }
        return values

    def eval_predicate(self, e, values) -> np.ndarray:
        """Evaluate a width-1 expression (e.g. an input constraint)."""
        return self._eval(e, values)
