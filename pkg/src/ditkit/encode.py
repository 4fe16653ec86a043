"""Tseitin encoding of the unrolled 2-instance model into CNF.

A WindowEncoding lays out `frames + 1` time points (0..frames) for both
instances of the design. Shared control inputs map to one variable for
both instances; data inputs, box outputs and (symbolic) initial
registers are free per instance. Registers at frame t+1 reuse the
literal of the next-state function evaluated at frame t. Every named
bit signal is registered in the variable map (signal, instance, cycle,
bit) -> literal, so models decode into full two-instance traces.

Assumptions (state equalities, input constraints, invariants,
cross-equalities, box-output equalities) and proof goals are added as
clauses on top of the circuit encoding; each solver query gets its own
goal clause.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blast import bitblast, blast_expr, bit_name
from .miter import INSTANCES, MiterModel
from .netlist import Netlist


class BudgetExceeded(Exception):
    pass


class EncodingBug(AssertionError):
    """A decoded model disagrees with the reference simulator."""


@dataclass
class CnfInstance:
    nvars: int
    clauses: list[list[int]]
    varmap: dict  # (signal, instance, cycle, bit) -> literal
    meta: dict = field(default_factory=dict)

    def lookup(self, signal, instance, cycle, bit=0):
        return self.varmap[(signal, instance, cycle, bit)]


class WindowEncoding:
    def __init__(self, m: MiterModel, frames: int, from_reset: bool = False,
                 clause_budget: int | None = None):
        self.m = m
        self.frames = frames
        self.from_reset = from_reset
        self.clause_budget = clause_budget
        self.n = m.base
        self.bb = bitblast(self.n)
        self.env = self.n.widths()
        self.bb_env = self.bb.widths()
        self.clauses: list[list[int]] = []
        self.nvars = 0
        # (instance, frame, bit-signal-name) -> literal
        self.lits: dict[tuple[str, int, str], int] = {}
        self._memo: dict[tuple[str, int, int], int] = {}
        # keep ad-hoc blasted expressions alive: the memo keys on id()
        self._pins: list = []
        self._bb_wire_order = self.bb.wire_order()
        self._bb_wire_exprs = {nm: e for nm, _, e in self.bb.wires}
        self.true_lit = self._fresh()
        self._clause([self.true_lit])
        self._build()

    # -- low-level ----------------------------------------------------------

    def _fresh(self) -> int:
        self.nvars += 1
        return self.nvars

    def _clause(self, lits):
        self.clauses.append(list(lits))
        if self.clause_budget is not None and len(self.clauses) > self.clause_budget:
            raise BudgetExceeded()

    def _equal(self, la, lb):
        if la != lb:
            self._clause([-la, lb])
            self._clause([la, -lb])

    def _and(self, a, b):
        if a == self.true_lit:
            return b
        if b == self.true_lit:
            return a
        if a == -self.true_lit or b == -self.true_lit:
            return -self.true_lit
        y = self._fresh()
        self._clause([-y, a])
        self._clause([-y, b])
        self._clause([y, -a, -b])
        return y

    def _xor(self, a, b):
        if a == self.true_lit:
            return -b
        if b == self.true_lit:
            return -a
        if a == -self.true_lit:
            return b
        if b == -self.true_lit:
            return a
        y = self._fresh()
        self._clause([-y, a, b])
        self._clause([-y, -a, -b])
        self._clause([y, -a, b])
        self._clause([y, a, -b])
        return y

    def _mux(self, c, t, f):
        if c == self.true_lit:
            return t
        if c == -self.true_lit:
            return f
        if t == f:
            return t
        y = self._fresh()
        self._clause([-y, -c, t])
        self._clause([-y, c, f])
        self._clause([y, -c, -t])
        self._clause([y, c, -f])
        return y

    def diff_var(self, a, b):
        """Fresh d with d <-> (a xor b)."""
        return self._xor(a, b)

    # -- circuit ------------------------------------------------------------

    def _encode_bit_expr(self, e, inst, frame):
        key = (inst, frame, id(e))
        lit = self._memo.get(key)
        if lit is not None:
            return lit
        op = e.op
        if op == "ref":
            lit = self.lits[(inst, frame, e.name)]
        elif op == "const":
            lit = self.true_lit if e.value else -self.true_lit
        elif op == "not":
            lit = -self._encode_bit_expr(e.args[0], inst, frame)
        elif op == "and":
            lit = self._and(
                self._encode_bit_expr(e.args[0], inst, frame),
                self._encode_bit_expr(e.args[1], inst, frame),
            )
        elif op == "xor":
            lit = self._xor(
                self._encode_bit_expr(e.args[0], inst, frame),
                self._encode_bit_expr(e.args[1], inst, frame),
            )
        elif op == "mux":
            lit = self._mux(
                self._encode_bit_expr(e.args[0], inst, frame),
                self._encode_bit_expr(e.args[1], inst, frame),
                self._encode_bit_expr(e.args[2], inst, frame),
            )
        else:
            raise ValueError("bit-level netlists use and/not/xor/mux only, got %r" % op)
        self._memo[key] = lit
        return lit

    def _register(self, inst, frame, name, lit):
        self.lits[(inst, frame, name)] = lit

    def _bits(self, name):
        w = self.env[name] if name in self.env else 1
        return [bit_name(name, i, w) for i in range(w)]

    def _build(self):
        n, bb = self.n, self.bb
        ctrl_in = set(self.m.shared_control_inputs)
        equal_box_outs = set(self.m.equal_box_outputs())

        for frame in range(self.frames + 1):
            # inputs: shared control variable, free data per instance
            for p in n.inputs:
                for b in self._bits(p.name):
                    if p.name in ctrl_in:
                        v = self._fresh()
                        self._register("A", frame, b, v)
                        self._register("B", frame, b, v)
                    else:
                        for inst in INSTANCES:
                            self._register(inst, frame, b, self._fresh())
            # box outputs: free per instance, equal per mode
            for o in n.box_output_signals():
                for b in self._bits(o.name):
                    va = self._fresh()
                    vb = self._fresh()
                    self._register("A", frame, b, va)
                    self._register("B", frame, b, vb)
                    if o.name in equal_box_outs:
                        self._equal(va, vb)
            # registers entering this frame
            if frame == 0:
                for r in n.regs:
                    for i, b in enumerate(self._bits(r.name)):
                        if self.from_reset and r.init is not None:
                            bitval = (r.init >> i) & 1
                            for inst in INSTANCES:
                                lit = self.true_lit if bitval else -self.true_lit
                                self._register(inst, 0, b, lit)
                        else:
                            for inst in INSTANCES:
                                self._register(inst, 0, b, self._fresh())
            # combinational logic: wires, outputs, box inputs, next fns
            for inst in INSTANCES:
                for wname in self._bb_wire_order:
                    lit = self._encode_bit_expr(self._bb_wire_exprs[wname], inst, frame)
                    self._register(inst, frame, wname, lit)
                for p in bb.outputs:
                    lit = self._encode_bit_expr(bb.drive_fns[p.name], inst, frame)
                    self._register(inst, frame, p.name, lit)
                for box in bb.boxes:
                    for bi in box.inputs:
                        lit = self._encode_bit_expr(bi.expr, inst, frame)
                        self._register(inst, frame, "%s.%s" % (box.name, bi.name), lit)
                if frame < self.frames:
                    for rname, e in bb.next_fns.items():
                        lit = self._encode_bit_expr(e, inst, frame)
                        self._register(inst, frame + 1, rname, lit)

        for a, b in self.m.cross_equalities:
            self._assume_cross_equality(a, b)

    # -- assumptions ----------------------------------------------------------

    def word_lits(self, signal, inst, frame):
        """Literals of a word signal, LSB first. Box inputs are named
        '<box>.<port>'."""
        if signal in self.env:
            return [self.lits[(inst, frame, b)] for b in self._bits(signal)]
        if signal in {p.name for p in self.n.outputs}:
            w = {p.name: p.width for p in self.n.outputs}[signal]
            return [self.lits[(inst, frame, bit_name(signal, i, w))] for i in range(w)]
        if "." in signal:
            box_name, port = signal.split(".", 1)
            for box in self.n.boxes:
                if box.name == box_name:
                    for bi in box.inputs:
                        if bi.name == port:
                            from .expr import expr_width

                            w = expr_width(bi.expr, self.env)
                            return [
                                self.lits[(inst, frame, bit_name(signal, i, w))]
                                for i in range(w)
                            ]
        raise KeyError("unknown signal %r" % signal)

    def assume_equal(self, signal, frame):
        for la, lb in zip(self.word_lits(signal, "A", frame), self.word_lits(signal, "B", frame)):
            self._equal(la, lb)

    def _assume_cross_equality(self, a, b):
        inst_a = inst_b = None
        if "." in a and a.split(".", 1)[0] in INSTANCES:
            inst_a, a = a.split(".", 1)
        if "." in b and b.split(".", 1)[0] in INSTANCES:
            inst_b, b = b.split(".", 1)
        for frame in range(self.frames + 1):
            if inst_a is None:
                # symmetric across instances: a@A == b@B and a@B == b@A
                for la, lb in zip(self.word_lits(a, "A", frame), self.word_lits(b, "B", frame)):
                    self._equal(la, lb)
                if a != b:
                    for la, lb in zip(self.word_lits(a, "B", frame), self.word_lits(b, "A", frame)):
                        self._equal(la, lb)
            else:
                for la, lb in zip(
                    self.word_lits(a, inst_a, frame), self.word_lits(b, inst_b, frame)
                ):
                    self._equal(la, lb)

    def constraint_lit(self, e, inst, frame):
        """Encode a width-1 word expression in an instance/frame context."""
        bits = blast_expr(e, self.env)
        if len(bits) != 1:
            raise ValueError("constraint expressions must have width 1")
        self._pins.append(bits)
        return self._encode_bit_expr(bits[0], inst, frame)

    def assume_constraint(self, e, inst, frame):
        self._clause([self.constraint_lit(e, inst, frame)])

    def diff_indicators(self, signal, frame):
        """One indicator literal per bit: true iff instances differ."""
        return [
            self.diff_var(la, lb)
            for la, lb in zip(
                self.word_lits(signal, "A", frame), self.word_lits(signal, "B", frame)
            )
        ]

    # -- queries ---------------------------------------------------------------

    def snapshot(self):
        return len(self.clauses), self.nvars

    def rollback(self, mark):
        nclauses, nv = mark
        del self.clauses[nclauses:]
        self.nvars = nv
        # memoized gate literals above nv are now invalid
        self._memo = {k: v for k, v in self._memo.items() if abs(v) <= nv}

    def instance(self, goal_clause, meta) -> CnfInstance:
        varmap = {}
        for (inst, frame, bname), lit in self.lits.items():
            base, bit = _split_bit(bname)
            varmap[(base, inst, frame, bit)] = lit
        return CnfInstance(
            nvars=self.nvars,
            clauses=self.clauses + ([list(goal_clause)] if goal_clause is not None else []),
            varmap=varmap,
            meta=meta,
        )


def _split_bit(bname):
    if bname.endswith("]") and "[" in bname:
        base, idx = bname.rsplit("[", 1)
        return base, int(idx[:-1])
    return bname, 0


def decode_values(enc: WindowEncoding, model: dict[int, bool]):
    """Model -> {instance: {signal: [value per frame]}} for all named
    word signals (inputs, registers, wires, outputs, box outputs and
    box inputs)."""

    def lit_val(lit):
        v = model.get(abs(lit), False)
        return (not v) if lit < 0 else v

    n = enc.n
    names = (
        [p.name for p in n.inputs]
        + [r.name for r in n.regs]
        + [w for w, _, _ in n.wires]
        + [p.name for p in n.outputs]
        + [o.name for o in n.box_output_signals()]
        + ["%s.%s" % (b.name, i.name) for b in n.boxes for i in b.inputs]
    )
    out = {}
    for inst in INSTANCES:
        vals = {}
        for sig in names:
            per_frame = []
            for frame in range(enc.frames + 1):
                bits = enc.word_lits(sig, inst, frame)
                v = 0
                for i, lit in enumerate(bits):
                    if lit_val(lit):
                        v |= 1 << i
                per_frame.append(v)
            vals[sig] = per_frame
        out[inst] = vals
    return out
