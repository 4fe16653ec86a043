"""Shared test infrastructure: a seeded random-netlist generator, an
independent AIGER evaluator, and a semantic (simulation-based)
re-implementation of the step obligation used to cross-check the CNF
path. Everything here deliberately avoids the encode/solve machinery."""

from __future__ import annotations

import random

import numpy as np

from ditkit.expr import (
    const,
    eadd,
    eand,
    econcat,
    eeq,
    emul,
    emux,
    enot,
    eor,
    eshl,
    eshr,
    eslice,
    esub,
    eult,
    exor,
    ref,
)
from ditkit.netlist import CONTROL, DATA, Netlist, Port, Register
from ditkit.sim import BatchSim

_U64 = np.uint64


# ---------------------------------------------------------------------------
# Random netlists


def _rand_expr(rng, width, pool, depth):
    """Random expression of exactly `width` bits over `pool` (name->width)."""
    same = [nm for nm, w in pool.items() if w == width]
    if depth <= 0 or (rng.random() < 0.25 and same):
        if same and rng.random() < 0.8:
            return ref(rng.choice(same))
        return const(width, rng.randrange(1 << width))
    choice = rng.randrange(12)
    sub = lambda w=width, d=None: _rand_expr(rng, w, pool, depth - 1 if d is None else d)
    if choice == 0:
        return enot(sub())
    if choice == 1:
        return eand(sub(), sub())
    if choice == 2:
        return eor(sub(), sub())
    if choice == 3:
        return exor(sub(), sub())
    if choice == 4:
        return eadd(sub(), sub())
    if choice == 5:
        return esub(sub(), sub())
    if choice == 6:
        return emul(sub(), sub())
    if choice == 7:
        return emux(sub(1), sub(), sub())
    if choice == 8:
        return eshl(sub(), rng.randrange(width + 1)) if rng.random() < 0.5 else eshr(
            sub(), rng.randrange(width + 1)
        )
    if choice == 9 and width >= 2:
        lo_w = rng.randrange(1, width)
        return econcat(sub(width - lo_w), sub(lo_w))
    if choice == 10:
        wider = width + rng.randrange(1, 3)
        lo = rng.randrange(wider - width + 1)
        return eslice(sub(wider), lo + width - 1, lo)
    if width == 1:
        w = rng.randrange(1, 4)
        return (eeq if rng.random() < 0.5 else eult)(sub(w), sub(w))
    return eadd(sub(), sub())


def random_netlist(seed, max_state_bits=32, allow_uninit=False, name=None):
    """A small random valid netlist with at least one control output."""
    rng = random.Random(seed)
    n = Netlist(name=name or "rand%d" % seed)
    pool = {}
    for i in range(rng.randint(1, 3)):
        w = rng.randint(1, 4)
        role = CONTROL if rng.random() < 0.5 else DATA
        p = Port("in%d" % i, w, role)
        n.inputs.append(p)
        pool[p.name] = w
    state_bits = 0
    for i in range(rng.randint(0, 4)):
        w = rng.randint(1, 4)
        if state_bits + w > max_state_bits:
            break
        state_bits += w
        init = None if (allow_uninit and rng.random() < 0.2) else rng.randrange(1 << w)
        r = Register("r%d" % i, w, init)
        n.regs.append(r)
        pool[r.name] = w
    for i in range(rng.randint(0, 5)):
        w = rng.randint(1, 4)
        e = _rand_expr(rng, w, pool, rng.randint(1, 3))
        n.wires.append(("w%d" % i, w, e))
        pool["w%d" % i] = w
    for r in n.regs:
        n.next_fns[r.name] = _rand_expr(rng, r.width, pool, rng.randint(1, 3))
    n_out = rng.randint(1, 3)
    for i in range(n_out):
        w = rng.randint(1, 4)
        role = CONTROL if i == 0 else (CONTROL if rng.random() < 0.4 else DATA)
        p = Port("out%d" % i, w, role)
        n.outputs.append(p)
        n.drive_fns[p.name] = _rand_expr(rng, w, pool, rng.randint(1, 3))
    return n


def random_inputs(rng, n, cycles):
    return [
        {p.name: rng.randrange(1 << p.width) for p in n.inputs} for _ in range(cycles)
    ]


def random_init(rng, n):
    return {r.name: rng.randrange(1 << r.width) for r in n.regs}


# ---------------------------------------------------------------------------
# Independent AIGER semantics


def aiger_eval(text, input_seqs):
    """Evaluate an ascii AIGER design directly on literals; returns the
    list of output vectors per cycle. Completely separate from the
    importer/netlist machinery."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    hdr = lines[0].split()
    m, ni, nl, no, na = (int(x) for x in hdr[1:6])
    pos = 1
    in_lits = [int(lines[pos + k].split()[0]) for k in range(ni)]
    pos += ni
    latches = []
    for k in range(nl):
        parts = lines[pos + k].split()
        reset = int(parts[2]) if len(parts) > 2 else 0
        latches.append((int(parts[0]), int(parts[1]), reset))
    pos += nl
    out_lits = [int(lines[pos + k].split()[0]) for k in range(no)]
    pos += no
    ands = [tuple(int(x) for x in lines[pos + k].split()) for k in range(na)]

    state = {lit: reset for lit, _, reset in latches}

    def val(lit, env):
        if lit == 0:
            return 0
        if lit == 1:
            return 1
        v = env[lit & ~1]
        return v ^ (lit & 1)

    outs = []
    for ivals in input_seqs:
        env = dict(state)
        for lit, v in zip(in_lits, ivals):
            env[lit] = v
        for lhs, r0, r1 in ands:
            env[lhs] = val(r0, env) & val(r1, env)
        outs.append([val(o, env) for o in out_lits])
        state = {lit: val(nxt, env) for lit, nxt, _ in latches}
    return outs


# ---------------------------------------------------------------------------
# Semantic step obligation (enumeration over all free choices)


def _layout(n, ledger):
    """Bit layout of every free semantic choice in a step window."""
    fields = []  # (kind, name, frame/None, width)
    for r in n.regs:
        fields.append(("s0A", r.name, None, r.width))
    zd = set(ledger.z_d())
    for r in n.regs:
        if r.name in zd:
            fields.append(("s0B", r.name, None, r.width))
    for t in (0, 1):
        for p in n.inputs:
            if p.role == CONTROL:
                fields.append(("ctrl", p.name, t, p.width))
            else:
                fields.append(("dA", p.name, t, p.width))
                fields.append(("dB", p.name, t, p.width))
    equal_outs = None
    if n.boxes:
        from ditkit.miter import build_miter

        equal_outs = set(build_miter(n, ledger).equal_box_outputs())
        for t in (0, 1):
            for o in n.box_output_signals():
                if o.name in equal_outs:
                    fields.append(("box", o.name, t, o.width))
                else:
                    fields.append(("boxA", o.name, t, o.width))
                    fields.append(("boxB", o.name, t, o.width))
    total = sum(w for _, _, _, w in fields)
    return fields, total


def semantic_step_status(n, ledger, max_bits=22):
    """Brute-force the step obligation by enumerating every free choice
    and simulating both instances for two cycles. Returns
    (status, diff_register_set) mirroring the engine's query priority.
    """
    from ditkit.engine import CANDIDATE, HOLD, VIOLATED
    from ditkit.expr import eval_expr

    fields, total = _layout(n, ledger)
    if total > max_bits:
        raise ValueError("too many free bits: %d" % total)
    lanes = 1 << total
    idx = np.arange(lanes, dtype=_U64)

    vals = {}
    off = 0
    for kind, name, t, w in fields:
        vals[(kind, name, t)] = (idx >> _U64(off)) & _U64((1 << w) - 1)
        off += w

    zc = set(ledger.z_c())
    init_a = {}
    init_b = {}
    for r in n.regs:
        init_a[r.name] = vals[("s0A", r.name, None)]
        init_b[r.name] = (
            init_a[r.name] if r.name in zc else vals[("s0B", r.name, None)]
        )

    def frame_inputs(inst, t):
        out = {}
        for p in n.inputs:
            if p.role == CONTROL:
                out[p.name] = vals[("ctrl", p.name, t)]
            else:
                out[p.name] = vals[("d" + inst, p.name, t)]
        return out

    def frame_boxouts(inst, t):
        out = {}
        for o in n.box_output_signals():
            if ("box", o.name, t) in vals:
                out[o.name] = vals[("box", o.name, t)]
            else:
                out[o.name] = vals[("box" + inst, o.name, t)]
        return out

    sim_a = BatchSim(n, lanes).reset(init_a)
    sim_b = BatchSim(n, lanes).reset(init_b)
    va = [sim_a.step(frame_inputs("A", 0), frame_boxouts("A", 0)),
          sim_a.step(frame_inputs("A", 1), frame_boxouts("A", 1))]
    vb = [sim_b.step(frame_inputs("B", 0), frame_boxouts("B", 0)),
          sim_b.step(frame_inputs("B", 1), frame_boxouts("B", 1))]

    legal = np.ones(lanes, dtype=bool)
    probe = BatchSim(n, lanes)
    for _, e in ledger.phi:
        for t in (0, 1):
            legal &= probe.eval_predicate(e, frame_inputs("A", t)).astype(bool)
            legal &= probe.eval_predicate(e, frame_inputs("B", t)).astype(bool)
    for _, e in ledger.invariants:
        legal &= probe.eval_predicate(e, va[0]).astype(bool)
        legal &= probe.eval_predicate(e, vb[0]).astype(bool)
    for a, b in ledger.cross_equalities:
        for t in (0, 1):
            legal &= va[t].get(a, init_a.get(a)) == vb[t].get(b, init_b.get(b))
            legal &= vb[t].get(a, init_b.get(a)) == va[t].get(b, init_a.get(b))

    from ditkit.miter import build_miter

    m = build_miter(n, ledger)
    obs = [p.name for p in n.control_outputs()] + list(n.observations)
    ctrl_box = [o.qualified for o in m.box_input_obligations() if o.role == CONTROL]
    data_box = [o.qualified for o in m.box_input_obligations() if o.role == DATA]
    explicit = ledger.explicit_control()
    cands = [r.name for r in n.regs if r.name in set(m.candidate_states)]

    def reg_at1(inst, name):
        # register value entering frame 1 = next fn evaluated at frame 0
        v = (va if inst == "A" else vb)[0]
        sim = sim_a if inst == "A" else sim_b
        return sim._eval(n.next_fns[name], v)

    q1 = np.zeros(lanes, dtype=bool)
    for t in (0, 1):
        for o in obs:
            q1 |= va[t][o] != vb[t][o]
        for q in ctrl_box:
            q1 |= va[t][q] != vb[t][q]
    reg1_a = {z: reg_at1("A", z) for z in cands}
    reg1_b = {z: reg_at1("B", z) for z in cands}
    for z in cands:
        if z in explicit:
            q1 |= reg1_a[z] != reg1_b[z]
    if (q1 & legal).any():
        return VIOLATED, set()

    q2 = np.zeros(lanes, dtype=bool)
    if ledger.invariants:
        # need all regs at frame 1, not only candidates
        all1_a = {r.name: reg_at1("A", r.name) for r in n.regs}
        all1_b = {r.name: reg_at1("B", r.name) for r in n.regs}
        wires1_a = {**all1_a, **va[1]}
        wires1_b = {**all1_b, **vb[1]}
        for _, e in ledger.invariants:
            q2 |= ~probe.eval_predicate(e, wires1_a).astype(bool)
            q2 |= ~probe.eval_predicate(e, wires1_b).astype(bool)
        if (q2 & legal).any():
            return VIOLATED, set()

    diff_regs = set()
    q3 = np.zeros(lanes, dtype=bool)
    for z in cands:
        if z in explicit:
            continue
        d = (reg1_a[z] != reg1_b[z]) & legal
        if d.any():
            diff_regs.add(z)
            q3 |= d
    for t in (0, 1):
        for q in data_box:
            q3 |= (va[t][q] != vb[t][q]) & legal
    if q3.any():
        return CANDIDATE, diff_regs
    return HOLD, diff_regs
