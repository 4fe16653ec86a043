"""Import of ASCII AIGER 1.9 (`aag`) circuits.

Latches become width-1 registers with init per the AIGER reset
convention (0 by default, 1, or the latch's own literal meaning
uninitialized). Inputs and outputs default to role data; roles are then
usually overridden from a partition sidecar (see sidecar.apply_roles).
The binary `aig` variant is explicitly rejected.
"""

from __future__ import annotations

from .expr import const, eand, enot, ref
from .netlist import DATA, Netlist, Port, Register, validate


class AigerError(ValueError):
    pass


def import_aiger(data: bytes | str) -> Netlist:
    if isinstance(data, bytes):
        if data[:3] == b"aig":
            raise AigerError("binary 'aig' format is not supported, use ascii 'aag'")
        text = data.decode("ascii", errors="replace")
    else:
        text = data
    lines = [ln.rstrip() for ln in text.splitlines()]
    if not lines:
        raise AigerError("empty file")
    header = lines[0].split()
    if not header or header[0] != "aag":
        raise AigerError("malformed header: expected 'aag M I L O A ...'")
    try:
        counts = [int(x) for x in header[1:]]
    except ValueError:
        raise AigerError("malformed header: non-integer field") from None
    if len(counts) < 5 or len(counts) > 9:
        raise AigerError("malformed header: expected 5 to 9 counts")
    m, ni, nl, no, na = counts[:5]
    extra = counts[5:]
    if any(extra):
        raise AigerError("B/C/J/F sections are not supported")

    body = [ln for ln in lines[1:]]
    idx = 0

    def next_line(what):
        nonlocal idx
        while idx < len(body) and not body[idx].strip():
            idx += 1
        if idx >= len(body):
            raise AigerError("unexpected end of file while reading %s" % what)
        ln = body[idx]
        idx += 1
        return ln

    in_lits = []
    for k in range(ni):
        ln = next_line("input %d" % k)
        try:
            lit = int(ln.split()[0])
        except ValueError:
            raise AigerError("bad input line %r" % ln) from None
        if lit % 2 or lit == 0:
            raise AigerError("input literal %d must be a positive even literal" % lit)
        in_lits.append(lit)

    latches = []  # (lit, next_lit, reset)
    for k in range(nl):
        ln = next_line("latch %d" % k)
        parts = ln.split()
        if len(parts) < 2:
            raise AigerError("bad latch line %r" % ln)
        lit, nxt = int(parts[0]), int(parts[1])
        reset = int(parts[2]) if len(parts) > 2 else 0
        if lit % 2:
            raise AigerError("latch literal %d must be even" % lit)
        latches.append((lit, nxt, reset))

    out_lits = []
    for k in range(no):
        ln = next_line("output %d" % k)
        out_lits.append(int(ln.split()[0]))

    ands = []  # (lhs, rhs0, rhs1)
    for k in range(na):
        ln = next_line("and %d" % k)
        parts = ln.split()
        if len(parts) != 3:
            raise AigerError("bad and line %r" % ln)
        lhs, r0, r1 = (int(p) for p in parts)
        if lhs % 2 or lhs == 0:
            raise AigerError("and literal %d must be a positive even literal" % lhs)
        ands.append((lhs, r0, r1))

    # Symbol table and comments.
    names = {"i": {}, "l": {}, "o": {}}
    while idx < len(body):
        ln = body[idx]
        idx += 1
        if not ln.strip():
            continue
        if ln.startswith("c"):
            break
        kind = ln[0]
        if kind in names and " " in ln:
            pos_s, sym = ln[1:].split(" ", 1)
            try:
                names[kind][int(pos_s)] = sym.strip()
            except ValueError:
                raise AigerError("bad symbol line %r" % ln) from None
        else:
            raise AigerError("unexpected line %r" % ln)

    n = Netlist(name="aiger")
    sig_of = {}  # even literal -> signal name

    for k, lit in enumerate(in_lits):
        name = names["i"].get(k, "in%d" % k)
        n.inputs.append(Port(name, 1, DATA))
        sig_of[lit] = name
    for k, (lit, _, _) in enumerate(latches):
        name = names["l"].get(k, "latch%d" % k)
        sig_of[lit] = name
    for lhs, _, _ in ands:
        sig_of[lhs] = "n%d" % lhs

    def expr_of(lit):
        if lit == 0:
            return const(1, 0)
        if lit == 1:
            return const(1, 1)
        base = lit & ~1
        if base not in sig_of:
            raise AigerError("literal %d is not defined" % lit)
        e = ref(sig_of[base])
        return enot(e) if lit & 1 else e

    for lhs, r0, r1 in ands:
        n.wires.append((sig_of[lhs], 1, eand(expr_of(r0), expr_of(r1))))

    for k, (lit, nxt, reset) in enumerate(latches):
        name = sig_of[lit]
        if reset == lit:
            init = None  # uninitialized per AIGER 1.9
        elif reset in (0, 1):
            init = reset
        else:
            raise AigerError("latch %s reset %d is not 0/1/self" % (name, reset))
        n.regs.append(Register(name, 1, init))
        n.next_fns[name] = expr_of(nxt)

    for k, lit in enumerate(out_lits):
        name = names["o"].get(k, "out%d" % k)
        n.outputs.append(Port(name, 1, DATA))
        n.drive_fns[name] = expr_of(lit)

    diags = validate(n)
    if diags:
        raise AigerError("imported netlist is invalid: %s" % diags[0])
    return n
