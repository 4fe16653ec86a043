"""Sidecar files: partition overrides, campaign presets and decision rules.

One directive per line, ';' comments:

    role <signal-glob> (control|data)        ; port role override (AIGER import)
    class <reg-glob> (control|data)          ; decision rule for register locations
    on <glob> (data|control|invalid:<names>) ; decision rule for any location
    on-output <glob> (violation|invalid:<names>)
    constraint <name> = <expr>               ; active input constraint
    invariant <name> = <expr>                ; active state invariant
    crosseq <sig> <sig>                      ; active cross-instance equality
    defer constraint <name> = <expr>         ; defined, activated by invalid:<name>
    defer invariant <name> = <expr>
    box <name> (opaque|verified-do)
    opclass <name> = <expr>                  ; operation class for reporting

invalid:<names> is a comma-separated list of deferred definition names to
activate. Decision rules are matched first to last; `class` lines are
ordered together with `on` lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fnmatch import fnmatchcase

from .expr import Expr
from .fmt import ParseError, parse_expr_text
from .netlist import CONTROL, DATA, Netlist, Port


@dataclass(frozen=True)
class DecisionRule:
    scope: str  # "state" (registers + box inputs) or "output"
    glob: str
    action: str  # data | control | violation | invalid
    activates: tuple[str, ...] = ()


@dataclass
class Rules:
    role_overrides: list[tuple[str, str]] = field(default_factory=list)
    constraints: list[tuple[str, Expr]] = field(default_factory=list)
    invariants: list[tuple[str, Expr]] = field(default_factory=list)
    crosseqs: list[tuple[str, str]] = field(default_factory=list)
    deferred: dict[str, tuple[str, object]] = field(default_factory=dict)
    box_modes: dict[str, str] = field(default_factory=dict)
    decision_rules: list[DecisionRule] = field(default_factory=list)
    opclasses: list[tuple[str, Expr]] = field(default_factory=list)

    def class_presets(self) -> list[tuple[str, str]]:
        """(glob, role) pairs from class/on rules, for one-shot proofs
        where there is no refinement loop to consult."""
        return [
            (r.glob, r.action)
            for r in self.decision_rules
            if r.scope == "state" and r.action in (CONTROL, DATA)
        ]


def _split_name_expr(rest: str, line_no: int):
    if "=" not in rest:
        raise ParseError("expected '<name> = <expr>'", line_no)
    name, expr_text = rest.split("=", 1)
    name = name.strip()
    if not name:
        raise ParseError("missing name before '='", line_no)
    return name, parse_expr_text(expr_text.strip(), line_no)


def _parse_action(word: str, line_no: int, allowed: tuple[str, ...]):
    if word.startswith("invalid:"):
        names = tuple(x.strip() for x in word[len("invalid:") :].split(",") if x.strip())
        if not names:
            raise ParseError("invalid: needs at least one definition name", line_no)
        return "invalid", names
    if word in allowed:
        return word, ()
    raise ParseError("expected one of %s or invalid:<names>, found %r" % ("/".join(allowed), word), line_no)


def parse_rules(text: str) -> Rules:
    rules = Rules()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        head = parts[0]
        rest = parts[1] if len(parts) > 1 else ""
        if head == "role":
            toks = rest.split()
            if len(toks) != 2 or toks[1] not in (CONTROL, DATA):
                raise ParseError("expected 'role <glob> (control|data)'", line_no)
            rules.role_overrides.append((toks[0], toks[1]))
        elif head == "class":
            toks = rest.split()
            if len(toks) != 2 or toks[1] not in (CONTROL, DATA):
                raise ParseError("expected 'class <glob> (control|data)'", line_no)
            rules.decision_rules.append(DecisionRule("state", toks[0], toks[1]))
        elif head == "on":
            toks = rest.split()
            if len(toks) != 2:
                raise ParseError("expected 'on <glob> <action>'", line_no)
            action, activates = _parse_action(toks[1], line_no, (DATA, CONTROL))
            rules.decision_rules.append(DecisionRule("state", toks[0], action, activates))
        elif head == "on-output":
            toks = rest.split()
            if len(toks) != 2:
                raise ParseError("expected 'on-output <glob> <action>'", line_no)
            action, activates = _parse_action(toks[1], line_no, ("violation",))
            rules.decision_rules.append(DecisionRule("output", toks[0], action, activates))
        elif head == "constraint":
            rules.constraints.append(_split_name_expr(rest, line_no))
        elif head == "invariant":
            rules.invariants.append(_split_name_expr(rest, line_no))
        elif head == "crosseq":
            toks = rest.split()
            if len(toks) != 2:
                raise ParseError("expected 'crosseq <sig> <sig>'", line_no)
            rules.crosseqs.append((toks[0], toks[1]))
        elif head == "defer":
            toks = rest.split(None, 1)
            if len(toks) != 2 or toks[0] not in ("constraint", "invariant"):
                raise ParseError("expected 'defer (constraint|invariant) <name> = <expr>'", line_no)
            name, e = _split_name_expr(toks[1], line_no)
            if name in rules.deferred:
                raise ParseError("deferred definition %r repeated" % name, line_no)
            rules.deferred[name] = (toks[0], e)
        elif head == "box":
            toks = rest.split()
            if len(toks) != 2 or toks[1] not in ("opaque", "verified-do"):
                raise ParseError("expected 'box <name> (opaque|verified-do)'", line_no)
            rules.box_modes[toks[0]] = toks[1]
        elif head == "opclass":
            rules.opclasses.append(_split_name_expr(rest, line_no))
        else:
            raise ParseError("unknown directive %r" % head, line_no)
    return rules


def apply_roles(n: Netlist, rules: Rules) -> Netlist:
    """Return a copy of n with port roles overridden by role lines
    (first matching line wins, later lines do not re-override)."""

    def remap(ports):
        out = []
        for p in ports:
            role = p.role
            for glob, r in rules.role_overrides:
                if fnmatchcase(p.name, glob):
                    role = r
                    break
            out.append(Port(p.name, p.width, role))
        return out

    m = Netlist(
        name=n.name,
        inputs=remap(n.inputs),
        outputs=remap(n.outputs),
        regs=list(n.regs),
        wires=list(n.wires),
        next_fns=dict(n.next_fns),
        drive_fns=dict(n.drive_fns),
        boxes=list(n.boxes),
        observations=list(n.observations),
    )
    return m


def apply_presets(ledger, rules: Rules, include_class: bool = False, provenance: str = "scripted-rule"):
    """Install active constraint/invariant/crosseq/box entries into a
    ledger; with include_class, also pre-apply class globs (one-shot
    proofs only, the refinement loop consults them as decisions)."""
    for name, e in rules.constraints:
        ledger.add_phi(name, e)
    for name, e in rules.invariants:
        ledger.add_invariant(name, e)
    for a, b in rules.crosseqs:
        ledger.add_cross_equality(a, b)
    for box, mode in rules.box_modes.items():
        ledger.set_box_mode(box, mode)
    if include_class:
        for glob, role in rules.class_presets():
            for r in ledger.netlist.regs:
                if fnmatchcase(r.name, glob):
                    ledger.classify(r.name, role, provenance)
    return ledger


def match_decision(rules: Rules, scope: str, location: str) -> DecisionRule | None:
    for r in rules.decision_rules:
        if r.scope == scope and fnmatchcase(location, r.glob):
            return r
    return None
