"""Proof obligations over the miter: encode, solve, extract, replay.

Five templates are provided:

* check_step: the single-cycle inductive property. Assumes control-state
  equivalence, invariants and input constraints at the window start and
  proves control-state equivalence and invariants after one transition
  plus control-output equality across the whole window.
* check_base: both instances from reset (uninitialized registers free
  per instance), proving the step proof's assumptions after a warm-up.
* check_unrolled_io / check_unrolled: bounded proofs from an arbitrary
  but equal full state, over k transitions.
* check_signal: the per-register split of the step property.

Each obligation is answered by up to three solver queries in a fixed
priority order: (1) can a control-visible location diverge (control
outputs, observation points, control box inputs, explicitly
control-classified registers), (2) can an invariant commitment fail,
(3) can a propagation candidate diverge (unclassified registers, data
box inputs). The first satisfiable query determines the status, which
makes statuses deterministic and puts output divergence first.

Every extracted counterexample is replayed through the reference
simulator before it is returned; a mismatch raises EncodingBug.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .encode import BudgetExceeded, EncodingBug, WindowEncoding, decode_values
from .miter import INSTANCES, MiterModel, PartitionLedger
from .netlist import CONTROL, DATA, Netlist
from .sat import SAT, UNKNOWN, UNSAT, EmbeddedSolver
from .sim import simulate

HOLD = "hold"
VIOLATED = "violated"
CANDIDATE = "candidate-propagation"
UNKNOWN_STATUS = "unknown"

KIND_STATE = "state"
KIND_CONTROL_STATE = "control-state"
KIND_OUTPUT = "output"
KIND_BOX_INPUT = "box-input"
KIND_INVARIANT = "invariant"


@dataclass(frozen=True)
class ObligationSpec:
    kind: str  # step | base | unrolled-io | unrolled | per-signal | box-flows
    window: int  # transitions: step/per-signal 1, base warm-up r, unrolled k
    target: str | None = None  # per-signal register

    def to_json(self):
        d = {"kind": self.kind, "window": self.window}
        if self.target is not None:
            d["target"] = self.target
        return d


@dataclass(frozen=True)
class Diff:
    loc: str
    cycle: int
    kind: str

    def to_json(self):
        return {"loc": self.loc, "cycle": self.cycle, "kind": self.kind}


@dataclass
class Counterexample:
    design: str
    obligation: ObligationSpec
    window: int
    values: dict  # {"A": {sig: [per-cycle]}, "B": {...}}
    diffs: list[Diff]

    def to_json(self):
        return {
            "design": self.design,
            "obligation": self.obligation.to_json(),
            "k": self.window,
            "instances": {inst: self.values[inst] for inst in INSTANCES},
            "diffs": [d.to_json() for d in self.diffs],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


@dataclass
class ProofResult:
    status: str
    obligation: ObligationSpec
    cex: Counterexample | None = None
    reason: str = ""
    stats: dict = field(default_factory=dict)
    # complete analysis of a propagation result: every classifiable
    # location that can diverge under the same assumptions, confirmed by
    # a focused query each (the witness trace alone may show fewer)
    diff_candidates: list[Diff] = field(default_factory=list)

    @property
    def ok(self):
        return self.status == HOLD


@dataclass
class EngineConfig:
    solver: object = field(default_factory=EmbeddedSolver)
    max_conflicts: int | None = 2_000_000
    clause_budget: int | None = 4_000_000
    base_warmup: int = 0


def _obs_locations(n: Netlist):
    """Control-visible output locations: control outputs plus observation
    points (internal signals an attacker is assumed to see)."""
    return [p.name for p in n.control_outputs()] + list(n.observations)


def _decl_index(n: Netlist):
    idx = {}
    for i, r in enumerate(n.regs):
        idx[r.name] = i
    base = len(n.regs)
    for i, b in enumerate(n.boxes):
        for j, bi in enumerate(b.inputs):
            idx["%s.%s" % (b.name, bi.name)] = base + i * 16 + j
    base += 16 * len(n.boxes) + 16
    for i, p in enumerate(n.outputs):
        idx[p.name] = base + i
    for i, s in enumerate(n.observations):
        idx.setdefault(s, base + len(n.outputs) + i)
    return idx


_KIND_RANK = {KIND_STATE: 0, KIND_CONTROL_STATE: 0, KIND_BOX_INPUT: 1, KIND_OUTPUT: 2, KIND_INVARIANT: 3}


class _Obligation:
    """Shared machinery for building and answering one obligation."""

    def __init__(self, m: MiterModel, ledger: PartitionLedger, spec: ObligationSpec,
                 cfg: EngineConfig, candidates=None):
        self.m = m
        self.ledger = ledger
        self.spec = spec
        self.cfg = cfg
        self.n = m.base
        if candidates is None:
            candidates = list(m.candidate_states)
        self.candidates = [r.name for r in self.n.regs if r.name in set(candidates)]
        explicit = ledger.explicit_control()
        self.explicit_cands = [z for z in self.candidates if z in explicit]
        self.default_cands = [z for z in self.candidates if z not in explicit]
        self.obs = _obs_locations(self.n)
        box_obl = m.box_input_obligations()
        self.ctrl_box = [o.qualified for o in box_obl if o.role == CONTROL]
        self.data_box = [o.qualified for o in box_obl if o.role == DATA]
        self.stats = {"queries": 0, "vars": 0, "clauses": 0, "time": 0.0,
                      "conflicts": 0}

    # template shapes ------------------------------------------------------

    def frames(self):
        return self.spec.window

    def output_frames(self):
        k = self.spec.kind
        if k in ("step", "per-signal", "box-flows"):
            return [0, 1]
        if k == "base":
            return [self.spec.window]
        return list(range(self.spec.window + 1))

    def state_frames(self):
        k = self.spec.kind
        if k in ("step", "per-signal", "box-flows"):
            return [1]
        if k == "base":
            return [self.spec.window]
        return list(range(1, self.spec.window + 1))

    def box_frames(self):
        k = self.spec.kind
        if k in ("step", "per-signal", "box-flows"):
            return [0, 1]
        if k == "base":
            return [self.spec.window]
        return list(range(self.spec.window + 1))

    def build(self):
        enc = WindowEncoding(
            self.m,
            self.frames(),
            from_reset=(self.spec.kind == "base"),
            clause_budget=self.cfg.clause_budget,
        )
        k = self.spec.kind
        if k in ("step", "per-signal", "box-flows"):
            for z in self.ledger.z_c():
                enc.assume_equal(z, 0)
            for _, e in self.ledger.invariants:
                for inst in INSTANCES:
                    enc.assume_constraint(e, inst, 0)
        elif k in ("unrolled-io", "unrolled"):
            for r in self.n.regs:
                enc.assume_equal(r.name, 0)
        for _, e in self.ledger.phi:
            for frame in range(self.frames() + 1):
                for inst in INSTANCES:
                    enc.assume_constraint(e, inst, frame)
        self.enc = enc
        return enc

    # queries ---------------------------------------------------------------

    def _solve_goal(self, goal_lits, meta):
        if not goal_lits:
            return None, None
        enc = self.enc
        cnf = enc.instance(goal_lits, meta)
        self.stats["queries"] += 1
        self.stats["vars"] = max(self.stats["vars"], cnf.nvars)
        self.stats["clauses"] = max(self.stats["clauses"], len(cnf.clauses))
        t0 = time.perf_counter()
        res = self.cfg.solver.solve(cnf.nvars, cnf.clauses, self.cfg.max_conflicts)
        self.stats["time"] += time.perf_counter() - t0
        self.stats["conflicts"] += res.conflicts
        return res, cnf

    def violation_goal(self):
        enc = self.enc
        lits = []
        for frame in self.output_frames():
            for sig in self.obs:
                lits += enc.diff_indicators(sig, frame)
        for frame in self.box_frames():
            for sig in self.ctrl_box:
                lits += enc.diff_indicators(sig, frame)
        for frame in self.state_frames():
            targets = self.explicit_cands
            if self.spec.kind == "per-signal":
                targets = [z for z in [self.spec.target] if z in self.explicit_cands]
            if self.spec.kind == "box-flows":
                targets = []
            for z in targets:
                lits += enc.diff_indicators(z, frame)
        return lits

    def invariant_goal(self):
        if self.spec.kind in ("unrolled-io", "unrolled") or not self.ledger.invariants:
            return []
        frame = self.state_frames()[-1]
        lits = []
        for _, e in self.ledger.invariants:
            for inst in INSTANCES:
                lits.append(-self.enc.constraint_lit(e, inst, frame))
        return lits

    def propagation_goal(self):
        enc = self.enc
        k = self.spec.kind
        if k == "unrolled-io":
            return []
        lits = []
        if k == "per-signal":
            targets = [z for z in [self.spec.target] if z in self.default_cands]
        elif k == "box-flows":
            targets = []
        else:
            targets = self.default_cands
        for frame in self.state_frames():
            for z in targets:
                lits += enc.diff_indicators(z, frame)
        if k in ("step", "base", "box-flows"):
            for frame in self.box_frames():
                for sig in self.data_box:
                    lits += enc.diff_indicators(sig, frame)
        return lits

    # diff extraction ---------------------------------------------------------

    def diff_locations(self):
        """(loc, frame, kind) triples compared when extracting a cex."""
        out = []
        for frame in self.state_frames():
            if self.spec.kind == "box-flows":
                break
            cands = self.candidates
            if self.spec.kind == "per-signal":
                cands = [self.spec.target]
            for z in cands:
                kind = KIND_CONTROL_STATE if z in self.explicit_cands else KIND_STATE
                out.append((z, frame, kind))
        for frame in self.box_frames():
            for sig in self.ctrl_box + (self.data_box if self.spec.kind not in ("unrolled", "unrolled-io") else []):
                out.append((sig, frame, KIND_BOX_INPUT))
        for frame in self.output_frames():
            for sig in self.obs:
                out.append((sig, frame, KIND_OUTPUT))
        return out

    def extract(self, model, invariant_check=False):
        values = decode_values(self.enc, model)
        diffs = []
        for loc, frame, kind in self.diff_locations():
            if values["A"][loc][frame] != values["B"][loc][frame]:
                diffs.append(Diff(loc, frame, kind))
        if invariant_check:
            diffs += self._failed_invariants(values)
        idx = _decl_index(self.n)
        diffs.sort(key=lambda d: (d.cycle, _KIND_RANK[d.kind], idx.get(d.loc, 999)))
        cex = Counterexample(
            design=self.n.name,
            obligation=self.spec,
            window=self.frames(),
            values=values,
            diffs=diffs,
        )
        if not replay_cex(self.n, cex):
            raise EncodingBug(
                "decoded counterexample does not replay through the simulator"
            )
        return cex

    def _failed_invariants(self, values):
        from .expr import eval_expr

        env = self.n.widths()
        frame = self.state_frames()[-1]
        out = []
        for name, e in self.ledger.invariants:
            for inst in INSTANCES:
                vals = {sig: values[inst][sig][frame] for sig in values[inst]}
                if not eval_expr(e, env, vals):
                    out.append(Diff("inv:%s@%s" % (name, inst), frame, KIND_INVARIANT))
        return out

    # driver ----------------------------------------------------------------

    def run(self) -> ProofResult:
        try:
            self.build()
        except BudgetExceeded:
            return ProofResult(UNKNOWN_STATUS, self.spec, reason="resource-limit:clauses",
                               stats=self.stats)
        if self.spec.kind in ("unrolled", "unrolled-io"):
            return self._run_scan()
        mark = self.enc.snapshot()
        plan = [
            ("violation", self.violation_goal, VIOLATED, ""),
            ("invariant", self.invariant_goal, VIOLATED, "invariant-refuted"),
            ("propagation", self.propagation_goal, CANDIDATE, ""),
        ]
        for name, goal_fn, status, reason in plan:
            try:
                goal = goal_fn()
            except BudgetExceeded:
                return ProofResult(UNKNOWN_STATUS, self.spec,
                                   reason="resource-limit:clauses", stats=self.stats)
            res, cnf = self._solve_goal(goal, {"query": name, "obligation": self.spec.to_json()})
            if res is None:
                self.enc.rollback(mark)
                continue
            if res.status == UNKNOWN:
                return ProofResult(UNKNOWN_STATUS, self.spec,
                                   reason="resource-limit:conflicts", stats=self.stats)
            if res.status == SAT:
                cex = self.extract(res.model, invariant_check=(name == "invariant"))
                cands = []
                if status == CANDIDATE:
                    self.enc.rollback(mark)
                    cands = self._enumerate_candidates(self.state_frames(), mark)
                return ProofResult(status, self.spec, cex=cex, reason=reason,
                                   stats=self.stats, diff_candidates=cands)
            self.enc.rollback(mark)
        return ProofResult(HOLD, self.spec, stats=self.stats)

    def _enumerate_candidates(self, state_frames, mark):
        """Per-location focused queries; returns every classifiable
        location that can diverge, with the earliest frame it can."""
        enc = self.enc
        out = []
        if self.spec.kind == "per-signal":
            reg_targets = [z for z in [self.spec.target] if z in self.default_cands]
        elif self.spec.kind == "box-flows":
            reg_targets = []
        else:
            reg_targets = self.default_cands
        for z in reg_targets:
            for frame in state_frames:
                res, _ = self._solve_goal(enc.diff_indicators(z, frame), {"query": "enum:%s@%d" % (z, frame)})
                sat = res is not None and res.status == SAT
                enc.rollback(mark)
                if sat:
                    out.append(Diff(z, frame, KIND_STATE))
                    break
        if self.spec.kind in ("step", "base", "box-flows"):
            for sig in self.data_box:
                for frame in self.box_frames():
                    res, _ = self._solve_goal(enc.diff_indicators(sig, frame), {"query": "enum:%s@%d" % (sig, frame)})
                    sat = res is not None and res.status == SAT
                    enc.rollback(mark)
                    if sat:
                        out.append(Diff(sig, frame, KIND_BOX_INPUT))
                        break
        idx = _decl_index(self.n)
        out.sort(key=lambda d: (_KIND_RANK[d.kind], idx.get(d.loc, 999), d.cycle))
        return out

    def _run_scan(self) -> ProofResult:
        """Unrolled templates scan cycle by cycle so the reported
        divergence is the earliest one reachable, with a violation
        taking priority over a propagation at the same cycle."""
        enc = self.enc
        mark = enc.snapshot()
        for c in range(self.frames() + 1):
            plan = [("violation", self._scan_violation_goal, VIOLATED)]
            if self.spec.kind == "unrolled":
                plan.append(("propagation", self._scan_propagation_goal, CANDIDATE))
            for name, build, status in plan:
                goal = build(c)
                res, _ = self._solve_goal(goal, {"query": "%s@%d" % (name, c)})
                if res is None:
                    enc.rollback(mark)
                    continue
                if res.status == UNKNOWN:
                    return ProofResult(UNKNOWN_STATUS, self.spec,
                                       reason="resource-limit:conflicts", stats=self.stats)
                if res.status == SAT:
                    cex = self.extract(res.model)
                    cands = []
                    if status == CANDIDATE:
                        enc.rollback(mark)
                        cands = self._enumerate_candidates([c], mark)
                    return ProofResult(status, self.spec, cex=cex, stats=self.stats,
                                       diff_candidates=cands)
                enc.rollback(mark)
        return ProofResult(HOLD, self.spec, stats=self.stats)

    def _scan_violation_goal(self, c):
        enc = self.enc
        lits = []
        for sig in self.obs:
            lits += enc.diff_indicators(sig, c)
        for sig in self.ctrl_box:
            lits += enc.diff_indicators(sig, c)
        if c >= 1 and self.spec.kind == "unrolled":
            for z in self.explicit_cands:
                lits += enc.diff_indicators(z, c)
        return lits

    def _scan_propagation_goal(self, c):
        if c == 0:
            return []
        enc = self.enc
        lits = []
        for z in self.default_cands:
            lits += enc.diff_indicators(z, c)
        return lits


def check_step(m, ledger, cfg=None, candidates=None) -> ProofResult:
    cfg = cfg or EngineConfig()
    return _Obligation(m, ledger, ObligationSpec("step", 1), cfg, candidates).run()


def check_base(m, ledger, warmup=0, cfg=None) -> ProofResult:
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    cfg = cfg or EngineConfig()
    return _Obligation(m, ledger, ObligationSpec("base", warmup), cfg).run()


def check_unrolled_io(m, ledger, k, cfg=None) -> ProofResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    cfg = cfg or EngineConfig()
    return _Obligation(m, ledger, ObligationSpec("unrolled-io", k), cfg).run()


def check_unrolled(m, ledger, k, cfg=None, candidates=None) -> ProofResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    cfg = cfg or EngineConfig()
    return _Obligation(m, ledger, ObligationSpec("unrolled", k), cfg, candidates).run()


def check_signal(m, ledger, z, cfg=None, candidates=None) -> ProofResult:
    cfg = cfg or EngineConfig()
    cand = set(candidates if candidates is not None else m.candidate_states)
    if z not in cand:
        raise ValueError("%r is not a candidate state" % z)
    return _Obligation(m, ledger, ObligationSpec("per-signal", 1, target=z), cfg, candidates).run()


def check_box_flows(m, ledger, cfg=None) -> ProofResult:
    """Data-box-input obligations under step assumptions; used by the
    per-signal scheduler, which has no register to attach them to."""
    cfg = cfg or EngineConfig()
    return _Obligation(m, ledger, ObligationSpec("box-flows", 1), cfg).run()


def step_diff_registers(m, ledger, cfg=None, candidates=None) -> set[str]:
    """The complete set of candidate registers that can diverge at t+1
    under step assumptions (one focused query per register)."""
    cfg = cfg or EngineConfig()
    ob = _Obligation(m, ledger, ObligationSpec("step", 1), cfg, candidates)
    ob.build()
    mark = ob.enc.snapshot()
    out = set()
    for z in ob.candidates:
        goal = ob.enc.diff_indicators(z, 1)
        res, _ = ob._solve_goal(goal, {"query": "diff:%s" % z})
        if res is not None and res.status == SAT:
            out.add(z)
        ob.enc.rollback(mark)
    return out


def replay_cex(n: Netlist, cex: Counterexample) -> bool:
    """Re-simulate both instances from the decoded stimuli and compare
    every recorded valuation bit-exactly."""
    cycles = cex.window + 1
    box_out_names = [o.name for o in n.box_output_signals()]
    for inst in INSTANCES:
        vals = cex.values[inst]
        init = {r.name: vals[r.name][0] for r in n.regs}
        inputs = [
            {p.name: vals[p.name][t] for p in n.inputs} for t in range(cycles)
        ]
        box_outputs = [
            {name: vals[name][t] for name in box_out_names} for t in range(cycles)
        ]
        try:
            tr = simulate(n, init_override=init, inputs=inputs, box_outputs=box_outputs or None)
        except Exception:
            return False
        for sig, recorded in vals.items():
            got = tr.values.get(sig)
            if got is None or list(got) != list(recorded)[: len(got)]:
                return False
    return True


def extract_cex(model, m: MiterModel, ledger, spec: ObligationSpec,
                cfg=None, candidates=None) -> Counterexample:
    """Decode a satisfying assignment into a two-instance counterexample.

    Standalone form used by tests; the check_* entry points extract
    internally. The model must come from an identically-built encoding.
    """
    cfg = cfg or EngineConfig()
    ob = _Obligation(m, ledger, spec, cfg, candidates)
    ob.build()
    return ob.extract(model)
