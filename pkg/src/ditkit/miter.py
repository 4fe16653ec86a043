"""Two-instance (2-safety) composition and the evolving state partition.

The miter instantiates a design twice: control inputs are shared
between the instances, data inputs are free per instance. Black boxes
have their outputs constrained equal across instances (all outputs in
opaque mode, control outputs only in verified-do mode) and their inputs
turned into equality obligations. Cross-equalities are user-supplied
assumptions tying signals across the two instances.

The PartitionLedger tracks the control/data classification of every
register together with its provenance, the active input constraints and
state invariants, and an append-only history of every change.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .expr import Expr, expr_refs, expr_width, pretty_expr
from .fmt import parse_expr_text
from .netlist import CONTROL, DATA, Netlist

INSTANCES = ("A", "B")

OPAQUE = "opaque"
VERIFIED_DO = "verified-do"

PROV_DEFAULT = "default"
PROV_USER = "user-decision"
PROV_RULE = "scripted-rule"


class LedgerError(ValueError):
    pass


@dataclass(frozen=True)
class Classification:
    role: str  # CONTROL or DATA
    provenance: str
    seq: int


class PartitionLedger:
    """Campaign state: Z classification, constraints, invariants,
    cross-equalities, box modes and accepted box-input flows."""

    def __init__(self, n: Netlist):
        self.netlist = n
        self._seq = itertools.count()
        self.state_class: dict[str, Classification] = {}
        self.phi: list[tuple[str, Expr]] = []
        self.invariants: list[tuple[str, Expr]] = []
        self.cross_equalities: list[tuple[str, str]] = []
        self.box_modes: dict[str, str] = {b.name: OPAQUE for b in n.boxes}
        self.accepted_box_flows: list[str] = []
        self.history: list[dict] = []
        for r in n.regs:
            self.state_class[r.name] = Classification(CONTROL, PROV_DEFAULT, next(self._seq))
        self._log("init", detail="all registers control (default)")

    # -- queries ----------------------------------------------------------

    def z_c(self) -> list[str]:
        return [r.name for r in self.netlist.regs if self.state_class[r.name].role == CONTROL]

    def z_d(self) -> list[str]:
        return [r.name for r in self.netlist.regs if self.state_class[r.name].role == DATA]

    def explicit_control(self) -> set[str]:
        return {
            name
            for name, c in self.state_class.items()
            if c.role == CONTROL and c.provenance != PROV_DEFAULT
        }

    def is_total(self) -> bool:
        return set(self.state_class) == {r.name for r in self.netlist.regs}

    def exclusions(self) -> dict:
        """Trust assumptions that demote a DO verdict to DO_phi.
        JSON-native shapes so the verdict round-trips through files."""
        return {
            "constraints": [[nm, pretty_expr(e)] for nm, e in self.phi],
            "cross_equalities": [list(p) for p in self.cross_equalities],
            "accepted_box_flows": list(self.accepted_box_flows),
            "verified_do_boxes": sorted(b for b, m in self.box_modes.items() if m == VERIFIED_DO),
        }

    def has_exclusions(self) -> bool:
        ex = self.exclusions()
        return any(ex.values())

    # -- mutations ---------------------------------------------------------

    def _log(self, event, **kw):
        self.history.append({"event": event, "seq": next(self._seq), **kw})

    def classify(self, reg: str, role: str, provenance: str = PROV_USER):
        if reg not in self.state_class:
            raise LedgerError("unknown register %r" % reg)
        if role not in (CONTROL, DATA):
            raise LedgerError("bad class %r" % role)
        self.state_class[reg] = Classification(role, provenance, next(self._seq))
        self._log("classify", register=reg, role=role, provenance=provenance)

    def reset_zc(self):
        """Alg. line after an invalid counterexample: back to all-control."""
        for reg in list(self.state_class):
            self.state_class[reg] = Classification(CONTROL, PROV_DEFAULT, next(self._seq))
        self._log("reset-zc")

    def add_phi(self, name: str, e: Expr):
        self._check_constraint(e, inputs_only=True, what="constraint %s" % name)
        if any(nm == name for nm, _ in self.phi):
            raise LedgerError("constraint %r already present" % name)
        self.phi.append((name, e))
        self._log("add-constraint", name=name, expr=pretty_expr(e))

    def add_invariant(self, name: str, e: Expr):
        self._check_constraint(e, inputs_only=False, what="invariant %s" % name)
        if any(nm == name for nm, _ in self.invariants):
            raise LedgerError("invariant %r already present" % name)
        self.invariants.append((name, e))
        self._log("add-invariant", name=name, expr=pretty_expr(e))

    def add_cross_equality(self, sig_a: str, sig_b: str):
        pair = _check_cross_pair(self.netlist, sig_a, sig_b)
        self.cross_equalities.append(pair)
        self._log("add-crosseq", a=pair[0], b=pair[1])

    def set_box_mode(self, box: str, mode: str):
        if box not in self.box_modes:
            raise LedgerError("unknown box %r" % box)
        if mode not in (OPAQUE, VERIFIED_DO):
            raise LedgerError("bad box mode %r" % mode)
        self.box_modes[box] = mode
        self._log("box-mode", box=box, mode=mode)

    def accept_box_flow(self, qualified: str):
        """Drop the equality obligation on one data box input; recorded
        as a trust assumption."""
        all_ins = {
            "%s.%s" % (b.name, i.name): i.role
            for b in self.netlist.boxes
            for i in b.inputs
        }
        if qualified not in all_ins:
            raise LedgerError("unknown box input %r" % qualified)
        if all_ins[qualified] != DATA:
            raise LedgerError("box input %r is control; its flow cannot be accepted" % qualified)
        if qualified not in self.accepted_box_flows:
            self.accepted_box_flows.append(qualified)
            self._log("accept-box-flow", location=qualified)

    def _check_constraint(self, e: Expr, inputs_only: bool, what: str):
        env = self.netlist.widths()
        w = expr_width(e, env)
        if w != 1:
            raise LedgerError("%s must have width 1, got %d" % (what, w))
        input_names = {p.name for p in self.netlist.inputs}
        reg_wire = {r.name for r in self.netlist.regs} | {n for n, _, _ in self.netlist.wires}
        for r in sorted(expr_refs(e)):
            if inputs_only and r not in input_names:
                raise LedgerError("%s references %r; constraints range over inputs only" % (what, r))
            if not inputs_only and r not in reg_wire:
                raise LedgerError("%s references %r; invariants range over registers and wires only" % (what, r))

    # -- persistence --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "state_class": {
                r: {"role": c.role, "provenance": c.provenance, "seq": c.seq}
                for r, c in self.state_class.items()
            },
            "phi": [{"name": nm, "expr": pretty_expr(e)} for nm, e in self.phi],
            "invariants": [{"name": nm, "expr": pretty_expr(e)} for nm, e in self.invariants],
            "cross_equalities": [list(p) for p in self.cross_equalities],
            "box_modes": dict(self.box_modes),
            "accepted_box_flows": list(self.accepted_box_flows),
            "history": list(self.history),
        }

    @classmethod
    def from_json(cls, n: Netlist, data: dict) -> "PartitionLedger":
        led = cls(n)
        led.history = []
        for r, c in data["state_class"].items():
            if r not in led.state_class:
                raise LedgerError("ledger register %r not in netlist" % r)
            led.state_class[r] = Classification(c["role"], c["provenance"], c["seq"])
        led.phi = [(d["name"], parse_expr_text(d["expr"])) for d in data["phi"]]
        led.invariants = [(d["name"], parse_expr_text(d["expr"])) for d in data["invariants"]]
        led.cross_equalities = [tuple(p) for p in data["cross_equalities"]]
        led.box_modes.update(data.get("box_modes", {}))
        led.accepted_box_flows = list(data.get("accepted_box_flows", []))
        led.history = list(data["history"])
        max_seq = 0
        for c in led.state_class.values():
            max_seq = max(max_seq, c.seq)
        for h in led.history:
            max_seq = max(max_seq, h.get("seq", 0))
        led._seq = itertools.count(max_seq + 1)
        return led


def _split_qualified(netlist, sig):
    """Split an optionally instance-qualified name 'A.sig' / 'B.sig'."""
    names = set(netlist.widths())
    if sig in names:
        return None, sig
    if "." in sig:
        inst, rest = sig.split(".", 1)
        if inst in INSTANCES and rest in names:
            return inst, rest
    raise LedgerError("unknown signal %r" % sig)


def _check_cross_pair(netlist, sig_a, sig_b):
    env = netlist.widths()
    ia, a = _split_qualified(netlist, sig_a)
    ib, b = _split_qualified(netlist, sig_b)
    if env[a] != env[b]:
        raise LedgerError(
            "cross-equality width mismatch: %s is %d bits, %s is %d bits"
            % (a, env[a], b, env[b])
        )
    if ia is None and ib is None:
        return (a, b)  # symmetric across instances
    if ia is None or ib is None:
        raise LedgerError("either both or neither signal may be instance-qualified")
    if ia == ib and a == b:
        raise LedgerError("degenerate cross-equality: %s equals itself in the same instance" % sig_a)
    return (sig_a, sig_b)


@dataclass(frozen=True)
class BoxObligation:
    box: str
    port: str
    role: str

    @property
    def qualified(self):
        return "%s.%s" % (self.box, self.port)


@dataclass(frozen=True)
class MiterModel:
    """Read-only snapshot handed to proof workers."""

    base: Netlist
    instance_tags: tuple[str, str] = INSTANCES
    shared_control_inputs: tuple[str, ...] = ()
    free_data_inputs: tuple[str, ...] = ()
    box_modes: dict = field(default_factory=dict)
    cross_equalities: tuple = ()
    candidate_states: tuple[str, ...] = ()
    accepted_box_flows: frozenset = frozenset()

    def box_input_obligations(self) -> list[BoxObligation]:
        """Box inputs that must stay equal across instances: everything
        in opaque mode, control inputs only in verified-do mode, minus
        accepted flows."""
        out = []
        for b in self.base.boxes:
            mode = self.box_modes.get(b.name, OPAQUE)
            for i in b.inputs:
                if mode == VERIFIED_DO and i.role == DATA:
                    continue
                ob = BoxObligation(b.name, i.name, i.role)
                if ob.qualified in self.accepted_box_flows:
                    continue
                out.append(ob)
        return out

    def equal_box_outputs(self) -> list[str]:
        """Box outputs constrained equal across instances."""
        out = []
        for b in self.base.boxes:
            mode = self.box_modes.get(b.name, OPAQUE)
            for o in b.outputs:
                if mode == VERIFIED_DO and o.role == DATA:
                    continue
                out.append(o.name)
        return out

    def free_box_outputs(self) -> list[str]:
        """Box outputs left free per instance (new discrepancy sources)."""
        equal = set(self.equal_box_outputs())
        return [o.name for b in self.base.boxes for o in b.outputs if o.name not in equal]


def build_miter(n: Netlist, ledger: PartitionLedger) -> MiterModel:
    if not ledger.is_total():
        raise LedgerError("ledger does not cover every register")
    return MiterModel(
        base=n,
        shared_control_inputs=tuple(p.name for p in n.control_inputs()),
        free_data_inputs=tuple(p.name for p in n.data_inputs()),
        box_modes=dict(ledger.box_modes),
        cross_equalities=tuple(ledger.cross_equalities),
        candidate_states=tuple(ledger.z_c()),
        accepted_box_flows=frozenset(ledger.accepted_box_flows),
    )


def apply_blackbox(m: MiterModel, box: str, mode: str) -> MiterModel:
    if box not in {b.name for b in m.base.boxes}:
        raise LedgerError("unknown box %r" % box)
    if mode not in (OPAQUE, VERIFIED_DO):
        raise LedgerError("bad box mode %r" % mode)
    modes = dict(m.box_modes)
    modes[box] = mode
    return MiterModel(
        base=m.base,
        shared_control_inputs=m.shared_control_inputs,
        free_data_inputs=m.free_data_inputs,
        box_modes=modes,
        cross_equalities=m.cross_equalities,
        candidate_states=m.candidate_states,
        accepted_box_flows=m.accepted_box_flows,
    )


def _comb_support(n: Netlist, e: Expr) -> set[str]:
    """Source signals (inputs, registers, box outputs) reachable from e
    through the combinational wire graph."""
    wire_exprs = {name: ex for name, _, ex in n.wires}
    seen = set()
    out = set()
    stack = list(expr_refs(e))
    while stack:
        s = stack.pop()
        if s in seen:
            continue
        seen.add(s)
        if s in wire_exprs:
            stack.extend(expr_refs(wire_exprs[s]))
        else:
            out.add(s)
    return out


def coi_candidates(m: MiterModel, ledger: PartitionLedger) -> set[str]:
    """Candidates restricted to the one-step sequential fan-out of the
    current discrepancy sources (data inputs, data state, free box
    outputs)."""
    n = m.base
    sources = {p.name for p in n.data_inputs()}
    sources |= set(ledger.z_d())
    sources |= set(m.free_box_outputs())
    out = set()
    for reg in m.candidate_states:
        if _comb_support(n, n.next_fns[reg]) & sources:
            out.add(reg)
    return out


def add_cross_equality(ledger: PartitionLedger, sig_a: str, sig_b: str) -> PartitionLedger:
    ledger.add_cross_equality(sig_a, sig_b)
    return ledger


def miter_stats(m: MiterModel) -> dict:
    n = m.base
    return {
        "instances": 2,
        "registers_per_instance": len(n.regs),
        "shared_control_inputs": len(m.shared_control_inputs),
        "free_data_inputs_per_instance": len(m.free_data_inputs),
        "candidates": len(m.candidate_states),
    }
