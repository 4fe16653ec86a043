"""Netlist IR: a word-level synchronous Mealy machine.

A design consists of role-tagged input/output ports, registers with
init values, named combinational wires, next-state and output-drive
expressions, optional black-box declarations and observation points.
Registers update simultaneously at cycle boundaries; outputs may read
inputs combinationally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from .expr import Expr, WidthError, expr_refs, expr_width, pretty_expr

CONTROL = "control"
DATA = "data"

# Marker for registers without a defined reset value.
UNINIT = None


@dataclass(frozen=True)
class Port:
    name: str
    width: int
    role: str  # CONTROL or DATA


@dataclass(frozen=True)
class Register:
    name: str
    width: int
    init: int | None  # UNINIT for no reset value


@dataclass(frozen=True)
class BoxPortIn:
    name: str
    expr: Expr
    role: str


@dataclass(frozen=True)
class BoxPortOut:
    name: str
    width: int
    role: str


@dataclass(frozen=True)
class BoxDecl:
    """Black-box declaration: inputs are driven expressions, outputs are
    fresh free signals with no driving logic in the model."""

    name: str
    inputs: tuple[BoxPortIn, ...]
    outputs: tuple[BoxPortOut, ...]


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    subject: str = ""

    def __str__(self):
        return "%s: %s" % (self.code, self.message)


@dataclass
class Netlist:
    name: str
    inputs: list[Port] = field(default_factory=list)
    outputs: list[Port] = field(default_factory=list)
    regs: list[Register] = field(default_factory=list)
    wires: list[tuple[str, int, Expr]] = field(default_factory=list)
    next_fns: dict[str, Expr] = field(default_factory=dict)
    drive_fns: dict[str, Expr] = field(default_factory=dict)
    boxes: list[BoxDecl] = field(default_factory=list)
    observations: list[str] = field(default_factory=list)

    # -- derived views ---------------------------------------------------

    def widths(self) -> dict[str, int]:
        """Width environment for all referenceable signals (inputs, regs,
        wires, box outputs). Output ports are driven, never referenced."""
        env = {}
        for p in self.inputs:
            env[p.name] = p.width
        for r in self.regs:
            env[r.name] = r.width
        for n, w, _ in self.wires:
            env[n] = w
        for b in self.boxes:
            for o in b.outputs:
                env[o.name] = o.width
        return env

    def all_names(self) -> list[str]:
        names = [p.name for p in self.inputs]
        names += [p.name for p in self.outputs]
        names += [r.name for r in self.regs]
        names += [n for n, _, _ in self.wires]
        for b in self.boxes:
            names += [o.name for o in b.outputs]
        return names

    def reg_map(self) -> dict[str, Register]:
        return {r.name: r for r in self.regs}

    def input_map(self) -> dict[str, Port]:
        return {p.name: p for p in self.inputs}

    def output_map(self) -> dict[str, Port]:
        return {p.name: p for p in self.outputs}

    def control_inputs(self) -> list[Port]:
        return [p for p in self.inputs if p.role == CONTROL]

    def data_inputs(self) -> list[Port]:
        return [p for p in self.inputs if p.role == DATA]

    def control_outputs(self) -> list[Port]:
        return [p for p in self.outputs if p.role == CONTROL]

    def box_map(self) -> dict[str, BoxDecl]:
        return {b.name: b for b in self.boxes}

    def box_output_signals(self) -> list[BoxPortOut]:
        return [o for b in self.boxes for o in b.outputs]

    def wire_order(self) -> list[str]:
        """Topological order of wire names (validated netlists only)."""
        order, _ = _toposort_wires(self)
        return order


def _toposort_wires(n: Netlist):
    """Topologically sort wires by reference dependencies.

    Returns (order, cycle) where cycle is a list of wire names forming a
    dependency cycle, or None. Only wire-to-wire edges matter: inputs,
    registers and box outputs are sources.
    """
    wire_exprs = {name: e for name, _, e in n.wires}
    deps = {
        name: sorted(r for r in expr_refs(e) if r in wire_exprs)
        for name, e in wire_exprs.items()
    }
    order = []
    state = {}  # 0 visiting, 1 done
    cycle_found = []

    for root in wire_exprs:
        if root in state:
            continue
        stack = [(root, iter(deps.get(root, ())))]
        state[root] = 0
        path = [root]
        while stack:
            node, it = stack[-1]
            advanced = False
            for dep in it:
                if dep not in state:
                    state[dep] = 0
                    stack.append((dep, iter(deps.get(dep, ()))))
                    path.append(dep)
                    advanced = True
                    break
                if state[dep] == 0 and not cycle_found:
                    i = path.index(dep)
                    cycle_found.extend(path[i:] + [dep])
            if not advanced:
                stack.pop()
                path.pop()
                state[node] = 1
                order.append(node)
    return order, (cycle_found or None)


def validate(n: Netlist) -> list[Diagnostic]:
    """Check all structural invariants; empty list iff the netlist is valid."""
    diags = []
    seen = set()
    for name in n.all_names():
        if name in seen:
            diags.append(Diagnostic("duplicate-name", "signal %r declared more than once" % name, name))
        seen.add(name)

    env = n.widths()
    out_widths = {p.name: p.width for p in n.outputs}
    referenceable = set(env)

    for p in n.inputs + n.outputs:
        if p.role not in (CONTROL, DATA):
            diags.append(Diagnostic("bad-role", "port %r has role %r" % (p.name, p.role), p.name))
        if p.width < 1:
            diags.append(Diagnostic("bad-width", "port %r has width %d" % (p.name, p.width), p.name))

    for r in n.regs:
        if r.width < 1:
            diags.append(Diagnostic("bad-width", "register %r has width %d" % (r.name, r.width), r.name))
        if r.init is not None and not 0 <= r.init < (1 << r.width):
            diags.append(Diagnostic("bad-init", "init %d does not fit register %r width %d" % (r.init, r.name, r.width), r.name))
        if r.name not in n.next_fns:
            diags.append(Diagnostic("missing-next", "register %r has no next function" % r.name, r.name))

    for p in n.outputs:
        if p.name not in n.drive_fns:
            diags.append(Diagnostic("missing-drive", "output %r has no drive function" % p.name, p.name))

    for name in n.next_fns:
        if name not in {r.name for r in n.regs}:
            diags.append(Diagnostic("unknown-reg", "next for undeclared register %r" % name, name))
    for name in n.drive_fns:
        if name not in out_widths:
            diags.append(Diagnostic("unknown-output", "drive for undeclared output %r" % name, name))

    def check_expr(e, expected, subject):
        for r in sorted(expr_refs(e)):
            if r not in referenceable:
                if r in out_widths:
                    diags.append(Diagnostic("output-ref", "%s references output %r (outputs cannot be read)" % (subject, r), subject))
                else:
                    diags.append(Diagnostic("undeclared-signal", "%s references unknown signal %r" % (subject, r), subject))
                return
        try:
            w = expr_width(e, env)
        except WidthError as we:
            node = we.node
            where = " in %s" % pretty_expr(node) if node is not None and node.op != "ref" else ""
            diags.append(Diagnostic("width-mismatch", "%s: %s%s" % (subject, we, where), subject))
            return
        if expected is not None and w != expected:
            diags.append(Diagnostic("width-mismatch", "%s has width %d, expected %d" % (subject, w, expected), subject))

    for name, w, e in n.wires:
        check_expr(e, w, "wire %s" % name)
    reg_widths = {r.name: r.width for r in n.regs}
    for name, e in n.next_fns.items():
        if name in reg_widths:
            check_expr(e, reg_widths[name], "next %s" % name)
    for name, e in n.drive_fns.items():
        if name in out_widths:
            check_expr(e, out_widths[name], "drive %s" % name)
    for b in n.boxes:
        for bi in b.inputs:
            if bi.role not in (CONTROL, DATA):
                diags.append(Diagnostic("bad-role", "box input %s.%s has role %r" % (b.name, bi.name, bi.role), b.name))
            check_expr(bi.expr, None, "box input %s.%s" % (b.name, bi.name))
        for bo in b.outputs:
            if bo.role not in (CONTROL, DATA):
                diags.append(Diagnostic("bad-role", "box output %r has role %r" % (bo.name, bo.role), bo.name))

    for name in n.observations:
        if name not in referenceable:
            diags.append(Diagnostic("observe-unknown", "observation of unknown signal %r" % name, name))

    _, cycle = _toposort_wires(n)
    if cycle:
        diags.append(Diagnostic("combinational-cycle", "wires form a cycle: %s" % " -> ".join(cycle), cycle[0]))

    return diags


def netlist_equal(a: Netlist, b: Netlist) -> bool:
    """Structural identity (used by round-trip tests)."""
    return (
        a.name == b.name
        and a.inputs == b.inputs
        and a.outputs == b.outputs
        and a.regs == b.regs
        and a.wires == b.wires
        and a.next_fns == b.next_fns
        and a.drive_fns == b.drive_fns
        and a.boxes == b.boxes
        and a.observations == b.observations
    )
