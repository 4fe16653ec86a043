"""Ground-truth oracles: exhaustive pair enumeration and random testing.

oracle_exhaustive checks the trace-level definition of data-oblivious
behavior literally on small designs: it enumerates input sequences from
reset, groups them by control-input sequence and verifies that every
group produces one single control-output trace. Control inputs are
enumerated freely per cycle; data inputs are held constant across the
window (stimulus policy "constant"), which keeps the enumeration inside
the budget while still exhibiting every leak pattern shipped in the
fixtures. A returned witness pair is always re-simulated before being
reported.

oracle_random samples start states by a constrained random walk from
reset, then runs paired simulations with equal control inputs and
independent random data inputs, reporting any control-output
divergence. Both oracles run on the vectorized simulator; neither
touches the SAT path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netlist import Netlist
from .sim import BatchSim, SimulationError, simulate

_U64 = np.uint64

DEFAULT_BUDGET = 1 << 24


class OracleError(ValueError):
    pass


@dataclass
class Witness:
    control_inputs: list[dict]  # per-cycle X_C values (shared by the pair)
    data_a: dict  # constant data input values, first sequence
    data_b: dict
    diff_cycle: int
    diff_output: str
    values_a: int
    values_b: int


@dataclass
class OracleVerdict:
    status: str  # "do" | "violation"
    witness: Witness | None = None
    simulations: int = 0
    groups: int = 0


def _observables(n: Netlist):
    return [p.name for p in n.control_outputs()] + list(n.observations)


def _check_supported(n: Netlist):
    if n.boxes:
        raise OracleError("designs with black boxes are outside the oracle's stimulus model")
    for r in n.regs:
        if r.init is None:
            raise OracleError("register %r is uninitialized; the oracle enumerates from reset only" % r.name)


def _bit_layout(ports):
    layout = []
    off = 0
    for p in ports:
        layout.append((p.name, off, p.width))
        off += p.width
    return layout, off


def _extract(idx_arr, off, width):
    return (idx_arr >> _U64(off)) & _U64((1 << width) - 1)


def oracle_exhaustive(
    n: Netlist,
    max_cycles: int,
    phi=(),
    budget: int = DEFAULT_BUDGET,
    chunk_rows: int | None = None,
) -> OracleVerdict:
    """Enumerate all (control sequence, constant data) stimuli and check
    group-wise control-output uniformity. phi is a list of (name, expr)
    input constraints; sequences with any constraint-violating cycle are
    excluded per the input-constrained trace definition."""
    _check_supported(n)
    if max_cycles < 1:
        raise OracleError("max_cycles must be >= 1")
    ctrl_layout, wc = _bit_layout(n.control_inputs())
    data_layout, wd = _bit_layout(n.data_inputs())
    seq_bits = wc * max_cycles
    if seq_bits > 62 or wd > 62:
        raise OracleError("stimulus space exceeds the enumerable range")
    nctrl = 1 << seq_bits
    ndata = 1 << wd
    sims = nctrl * ndata
    if sims > budget:
        raise OracleError(
            "stimulus space %d exceeds budget %d" % (sims, budget)
        )

    obs = _observables(n)
    obs_widths = {p.name: p.width for p in n.outputs}
    env = n.widths()
    for s in n.observations:
        obs_widths[s] = env[s]
    pack_bits = sum(obs_widths[o] for o in obs)
    if pack_bits * 1 > 60:
        raise OracleError("too many observable bits to pack")

    if chunk_rows is None:
        chunk_rows = max(1, min(nctrl, (1 << 20) // max(1, ndata)))

    groups_checked = 0
    for row0 in range(0, nctrl, chunk_rows):
        rows = min(chunk_rows, nctrl - row0)
        lanes = rows * ndata
        ctrl_idx = (np.arange(lanes, dtype=_U64) // _U64(ndata)) + _U64(row0)
        data_idx = np.arange(lanes, dtype=_U64) % _U64(ndata)

        bs = BatchSim(n, lanes).reset()
        legal = np.ones(lanes, dtype=bool)
        fingerprints = np.zeros((lanes, max_cycles), dtype=_U64)
        for t in range(max_cycles):
            inputs = {}
            for name, off, width in ctrl_layout:
                inputs[name] = _extract(ctrl_idx, wc * t + off, width)
            for name, off, width in data_layout:
                inputs[name] = _extract(data_idx, off, width)
            for _, e in phi:
                ok = bs.eval_predicate(e, inputs).astype(bool)
                legal &= ok
            vals = bs.step(inputs)
            packed = np.zeros(lanes, dtype=_U64)
            shift = 0
            for o in obs:
                packed |= vals[o] << _U64(shift)
                shift += obs_widths[o]
            fingerprints[:, t] = packed

        fp = fingerprints.reshape(rows, ndata, max_cycles)
        lg = legal.reshape(rows, ndata)
        if lg.all():
            uniform = (fp == fp[:, :1, :]).all(axis=(1, 2))
            bad_rows = np.nonzero(~uniform)[0]
        else:
            bad_rows = []
            for r in range(rows):
                li = np.nonzero(lg[r])[0]
                if len(li) < 2:
                    continue
                ref = fp[r, li[0]]
                if not (fp[r, li] == ref).all():
                    bad_rows.append(r)
            bad_rows = np.asarray(bad_rows, dtype=int)
        groups_checked += rows
        if len(bad_rows):
            r = int(bad_rows[0])
            li = np.nonzero(lg[r])[0]
            ref = fp[r, li[0]]
            for j in li[1:]:
                if not (fp[r, j] == ref).all():
                    witness = _build_witness(
                        n, phi, max_cycles, ctrl_layout, wc, data_layout,
                        row0 + r, int(li[0]), int(j), obs,
                    )
                    return OracleVerdict(
                        "violation", witness, simulations=sims, groups=groups_checked
                    )
    return OracleVerdict("do", None, simulations=sims, groups=groups_checked)


def _build_witness(n, phi, max_cycles, ctrl_layout, wc, data_layout, ctrl_i, di, dj, obs):
    """Reconstruct and re-simulate the first witness pair."""

    def ctrl_inputs(t):
        return {
            name: int((ctrl_i >> (wc * t + off)) & ((1 << width) - 1))
            for name, off, width in ctrl_layout
        }

    def data_values(didx):
        return {
            name: int((didx >> off) & ((1 << width) - 1))
            for name, off, width in data_layout
        }

    da, db = data_values(di), data_values(dj)
    seq = [ctrl_inputs(t) for t in range(max_cycles)]
    tr_a = simulate(n, inputs=[{**seq[t], **da} for t in range(max_cycles)])
    tr_b = simulate(n, inputs=[{**seq[t], **db} for t in range(max_cycles)])
    for t in range(max_cycles):
        for o in obs:
            va, vb = tr_a.values[o][t], tr_b.values[o][t]
            if va != vb:
                return Witness(seq, da, db, t, o, va, vb)
    raise OracleError("internal error: witness did not re-simulate to a divergence")


@dataclass
class RandomReport:
    trials: int
    horizon: int
    seed: int
    divergences: int = 0
    excluded_trials: int = 0
    first_divergence: dict | None = None

    @property
    def clean(self):
        return self.divergences == 0


def _random_legal_inputs(rng, n, phi, bs_probe, lanes, fixed_ctrl=None, fallback=None):
    """Draw per-input random valuations, rejection-sampling against phi.

    With fixed_ctrl the control part is pinned (second instance of a
    pair); lanes that cannot be fixed by resampling data fall back to
    the first instance's (known-legal) data values."""
    ctrl = {p.name: p for p in n.control_inputs()}
    inputs = None
    for attempt in range(100):
        draw = {}
        for p in n.inputs:
            if fixed_ctrl is not None and p.name in ctrl:
                draw[p.name] = fixed_ctrl[p.name]
            else:
                draw[p.name] = rng.integers(0, 1 << p.width, size=lanes, dtype=_U64)
        if inputs is None:
            inputs = draw
            bad = np.ones(lanes, dtype=bool)
        else:
            for name, arr in draw.items():
                inputs[name] = np.where(bad, arr, inputs[name])
        ok = np.ones(lanes, dtype=bool)
        for _, e in phi:
            ok &= bs_probe.eval_predicate(e, inputs).astype(bool)
        bad = ~ok
        if not bad.any():
            return inputs
    if fallback is not None:
        for p in n.data_inputs():
            inputs[p.name] = np.where(bad, fallback[p.name], inputs[p.name])
        return inputs
    raise OracleError("could not sample inputs satisfying the constraints")


def oracle_random(
    n: Netlist,
    ledger=None,
    trials: int = 10_000,
    horizon: int = 50,
    seed: int = 0,
    walk_max: int = 25,
) -> RandomReport:
    """Paired random simulation: equal control inputs, independent data
    inputs, identical start states reached by a constrained random walk
    from reset. Reports control-output divergences (which would indicate
    a toolchain bug whenever the inductive proofs hold)."""
    _check_supported(n)
    phi = list(ledger.phi) if ledger is not None else []
    crosseqs = list(ledger.cross_equalities) if ledger is not None else []
    report = RandomReport(trials=trials, horizon=horizon, seed=seed)
    if trials == 0:
        return report
    rng = np.random.default_rng(seed)
    obs = _observables(n)

    input_names = {p.name for p in n.inputs}
    input_crosseqs = []
    internal_crosseqs = []
    for a, b in crosseqs:
        aa = a.split(".", 1)[1] if a.split(".", 1)[0] in ("A", "B") and "." in a else a
        bb = b.split(".", 1)[1] if b.split(".", 1)[0] in ("A", "B") and "." in b else b
        if aa in input_names and bb in input_names:
            input_crosseqs.append((aa, bb))
        else:
            internal_crosseqs.append((aa, bb))

    # Random walk from reset to sample start states.
    walk = BatchSim(n, trials).reset()
    walk_len = rng.integers(0, walk_max + 1, size=trials)
    snapshots = {r.name: np.zeros((walk_max + 1, trials), dtype=_U64) for r in n.regs}
    for rname, arr in snapshots.items():
        arr[0] = walk.state[rname]
    for t in range(walk_max):
        inputs = _random_legal_inputs(rng, n, phi, walk, trials)
        walk.step(inputs)
        for rname, arr in snapshots.items():
            arr[t + 1] = walk.state[rname]
    start = {rname: arr[walk_len, np.arange(trials)] for rname, arr in snapshots.items()}

    sa = BatchSim(n, trials).reset(start)
    sb = BatchSim(n, trials).reset(start)
    excluded = np.zeros(trials, dtype=bool)
    diverged = np.zeros(trials, dtype=bool)
    first = None
    for t in range(horizon):
        ia = _random_legal_inputs(rng, n, phi, sa, trials)
        fixed_ctrl = {p.name: ia[p.name] for p in n.control_inputs()}
        ib = _random_legal_inputs(rng, n, phi, sb, trials, fixed_ctrl=fixed_ctrl, fallback=ia)
        for a, b in input_crosseqs:
            ib[b] = ia[a]
            ib[a] = ia[b] if b != a else ia[a]
        va = sa.step(ia)
        vb = sb.step(ib)
        for a, b in internal_crosseqs:
            if a in va and b in vb:
                excluded |= va[a] != vb[b]
                excluded |= vb[a] != va[b]
        for o in obs:
            d = (va[o] != vb[o]) & ~excluded & ~diverged
            if d.any():
                if first is None:
                    lane = int(np.nonzero(d)[0][0])
                    first = {
                        "trial": lane,
                        "cycle": t,
                        "output": o,
                        "a": int(va[o][lane]),
                        "b": int(vb[o][lane]),
                    }
                diverged |= d
    report.divergences = int(diverged.sum())
    report.excluded_trials = int(excluded.sum())
    report.first_divergence = first
    return report
