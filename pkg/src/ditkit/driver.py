"""The iterative refinement loop and its decision providers.

The loop starts from the all-control classification, proves the step
property, and refines on counterexamples: a diff that reached a
control-visible location is a violation (unless the provider rules it
an invalid counterexample and supplies new constraints or invariants,
which resets the classification); a diff on an unclassified register is
put to the provider, who either classifies it as data (removing it from
the proven set) or as control (ending the campaign with the
counterexample). When the step proof holds, the induction base closes
the argument and the verdict is assembled: data-oblivious outright, or
data-oblivious under the accumulated exclusions (constraints,
cross-equalities, accepted box flows, verified-do boxes).

Providers answer per diverging location. The scripted provider walks an
ordered rule list (the .rules sidecar); the interactive provider
forwards the query over a channel and blocks. Every answer lands in the
session's decisions log, which is sufficient to replay the campaign.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fnmatch import fnmatchcase

from .engine import (
    CANDIDATE,
    HOLD,
    KIND_BOX_INPUT,
    KIND_CONTROL_STATE,
    KIND_INVARIANT,
    KIND_OUTPUT,
    KIND_STATE,
    UNKNOWN_STATUS,
    VIOLATED,
    EngineConfig,
    check_base,
    check_box_flows,
    check_signal,
    check_step,
    check_unrolled,
    check_unrolled_io,
)
from .fmt import parse_netlist, pretty_print
from .miter import (
    CONTROL,
    DATA,
    PROV_RULE,
    PROV_USER,
    PartitionLedger,
    build_miter,
    coi_candidates,
)
from .session import (
    VERDICT_DO,
    VERDICT_DO_PHI,
    VERDICT_UNKNOWN,
    VERDICT_VIOLATION,
    Session,
)
from .sidecar import Rules

DECIDE_DATA = "data"
DECIDE_CONTROL = "control"
DECIDE_INVALID = "invalid"


class ProviderError(ValueError):
    pass


@dataclass
class Decision:
    kind: str
    constraints: list = field(default_factory=list)  # (name, Expr)
    invariants: list = field(default_factory=list)
    crosseqs: list = field(default_factory=list)
    rationale: str = ""

    def __post_init__(self):
        if self.kind == DECIDE_INVALID and not (
            self.constraints or self.invariants or self.crosseqs
        ):
            raise ProviderError("an invalid-counterexample decision must add at least one entry")

    def to_json(self):
        d = {"kind": self.kind}
        if self.constraints:
            d["constraints"] = [[nm, str(e)] for nm, e in self.constraints]
        if self.invariants:
            d["invariants"] = [[nm, str(e)] for nm, e in self.invariants]
        if self.crosseqs:
            d["crosseqs"] = [list(p) for p in self.crosseqs]
        if self.rationale:
            d["rationale"] = self.rationale
        return d


@dataclass(frozen=True)
class DecisionQuery:
    cex_id: str
    location: str
    kind: str  # diff kind
    cycle: int
    suggested: str  # data | violation


class ScriptedProvider:
    """Answers deterministically from an ordered rule list; raises on a
    location no rule matches."""

    provenance = PROV_RULE

    def __init__(self, rules: Rules):
        self.rules = rules
        self._activated: set[str] = set()

    def decide(self, query: DecisionQuery) -> Decision:
        scope = "output" if query.kind in (KIND_OUTPUT,) else "state"
        for rule in self.rules.decision_rules:
            if rule.scope != scope or not fnmatchcase(query.location, rule.glob):
                continue
            if rule.action in (DATA, CONTROL):
                return Decision(rule.action, rationale="rule: %s %s" % (rule.glob, rule.action))
            if rule.action == "violation":
                return Decision(DECIDE_CONTROL, rationale="rule: %s violation" % rule.glob)
            # invalid: activate deferred definitions; an exhausted rule
            # (everything already active) falls through to later rules
            new = [nm for nm in rule.activates if nm not in self._activated]
            if not new:
                continue
            constraints, invariants = [], []
            for nm in new:
                if nm not in self.rules.deferred:
                    raise ProviderError(
                        "invalid: references unknown deferred definition %r" % nm
                    )
                kind, e = self.rules.deferred[nm]
                (constraints if kind == "constraint" else invariants).append((nm, e))
                self._activated.add(nm)
            return Decision(
                DECIDE_INVALID,
                constraints=constraints,
                invariants=invariants,
                rationale="rule: %s invalid:%s" % (rule.glob, ",".join(new)),
            )
        raise ProviderError("no rule matches %s location %r" % (scope, query.location))


def scripted_provider(rules: Rules) -> ScriptedProvider:
    return ScriptedProvider(rules)


class CallableProvider:
    """Wrap a function (query -> Decision); used by tests and by the
    decisions-log replayer."""

    provenance = PROV_USER

    def __init__(self, fn, provenance=PROV_USER):
        self.fn = fn
        self.provenance = provenance

    def decide(self, query: DecisionQuery) -> Decision:
        return self.fn(query)


class InteractiveProvider:
    """Forwards each query over a channel object (ask(dict) -> dict) and
    blocks for the answer. The CLI binds the channel to stdin/stdout."""

    provenance = PROV_USER

    def __init__(self, channel):
        self.channel = channel

    def decide(self, query: DecisionQuery) -> Decision:
        ans = self.channel.ask(
            {
                "cex_id": query.cex_id,
                "location": query.location,
                "kind": query.kind,
                "cycle": query.cycle,
                "suggested": query.suggested,
            }
        )
        if ans is None:
            raise ProviderError("decision channel closed")
        kind = ans.get("kind")
        if kind in (DECIDE_DATA, DECIDE_CONTROL):
            return Decision(kind, rationale=ans.get("rationale", "interactive"))
        if kind == DECIDE_INVALID:
            from .fmt import parse_expr_text

            return Decision(
                DECIDE_INVALID,
                constraints=[(nm, parse_expr_text(t)) for nm, t in ans.get("constraints", [])],
                invariants=[(nm, parse_expr_text(t)) for nm, t in ans.get("invariants", [])],
                crosseqs=[tuple(p) for p in ans.get("crosseqs", [])],
                rationale=ans.get("rationale", "interactive"),
            )
        raise ProviderError("bad interactive answer %r" % ans)


def replay_provider(decisions_log: list[dict]) -> CallableProvider:
    """Rebuild a provider from a recorded decisions log: answers are
    matched by location in recorded order."""
    from .fmt import parse_expr_text

    queue = {}
    for rec in decisions_log:
        queue.setdefault(rec["location"], []).append(rec["decision"])

    def fn(query: DecisionQuery) -> Decision:
        entries = queue.get(query.location)
        if not entries:
            raise ProviderError("replay log has no decision for %r" % query.location)
        d = entries.pop(0)
        return Decision(
            d["kind"],
            constraints=[(nm, parse_expr_text(t)) for nm, t in d.get("constraints", [])],
            invariants=[(nm, parse_expr_text(t)) for nm, t in d.get("invariants", [])],
            crosseqs=[tuple(p) for p in d.get("crosseqs", [])],
            rationale="replay",
        )

    return CallableProvider(fn, provenance=PROV_RULE)


@dataclass
class RunOptions:
    mode: str = "inductive"  # inductive | unrolled | bughunt
    k: int = 4  # window for unrolled/bughunt modes
    base_warmup: int = 0
    workers: int = 1
    use_coi: bool = False
    per_signal: bool = False
    strict_alg1: bool = False
    max_iterations: int = 1000


# -- parallel per-signal scheduling ------------------------------------------


def _signal_task(args):
    netlist_text, ledger_json, z, candidates, max_conflicts, clause_budget = args
    n = parse_netlist(netlist_text)
    ledger = PartitionLedger.from_json(n, ledger_json)
    m = build_miter(n, ledger)
    cfg = EngineConfig(max_conflicts=max_conflicts, clause_budget=clause_budget)
    if z == "<box-flows>":
        return z, check_box_flows(m, ledger, cfg)
    return z, check_signal(m, ledger, z, cfg, candidates)


def schedule_parallel(n, ledger: PartitionLedger, workers: int = 1,
                      cfg: EngineConfig | None = None, use_coi: bool = False):
    """Run the per-register split of the step obligation, optionally on
    a process pool. Results are identical to sequential execution."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    cfg = cfg or EngineConfig()
    m = build_miter(n, ledger)
    cands = sorted(coi_candidates(m, ledger)) if use_coi else None
    order = [r.name for r in n.regs if r.name in set(cands if cands is not None else m.candidate_states)]
    targets = list(order)
    if any(o.role == DATA for o in m.box_input_obligations()):
        targets.append("<box-flows>")
    if workers == 1 or len(targets) <= 1:
        results = {}
        for z in targets:
            if z == "<box-flows>":
                results[z] = check_box_flows(m, ledger, cfg)
            else:
                results[z] = check_signal(m, ledger, z, cfg, cands)
        return results
    args = [
        (pretty_print(n), ledger.to_json(), z, cands, cfg.max_conflicts, cfg.clause_budget)
        for z in targets
    ]
    results = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for z, res in pool.map(_signal_task, args):
            results[z] = res
    return {z: results[z] for z in targets}


# -- the main loop -------------------------------------------------------------


CONTROL_VISIBLE = (KIND_OUTPUT, KIND_CONTROL_STATE)


def run_upec_dit(session: Session, provider, cfg: EngineConfig | None = None,
                 options: RunOptions | None = None) -> Session:
    cfg = cfg or EngineConfig()
    options = options or RunOptions()
    n = session.netlist
    ledger = session.ledger
    session.mode = options.mode if options.mode == "inductive" else "%s:%d" % (options.mode, options.k)

    if options.mode == "bughunt":
        return _run_bughunt(session, cfg, options)

    for _ in range(options.max_iterations):
        session.iterations += 1
        m = build_miter(n, ledger)
        cands = sorted(coi_candidates(m, ledger)) if options.use_coi else None

        if options.per_signal and options.mode == "inductive":
            outcome = _per_signal_iteration(session, provider, cfg, options)
        else:
            t0 = time.perf_counter()
            if options.mode == "unrolled":
                result = check_unrolled(m, ledger, options.k, cfg)
            else:
                result = check_step(m, ledger, cfg, cands)
            wall = time.perf_counter() - t0
            if result.status == UNKNOWN_STATUS:
                session.log_obligation(result, None, wall)
                session.set_verdict(VERDICT_UNKNOWN, reason=result.reason)
                return session
            if result.status == HOLD:
                session.log_obligation(result, None, wall)
                outcome = "hold"
            else:
                cid = session.add_cex(result.cex)
                session.log_obligation(result, cid, wall)
                outcome = _process_cex(session, provider, result, cid)

        if outcome == "hold":
            t0 = time.perf_counter()
            base = check_base(m, ledger, options.base_warmup, cfg)
            wallb = time.perf_counter() - t0
            if base.status == HOLD:
                session.log_obligation(base, None, wallb)
                _assemble_verdict(session)
                return session
            if base.status == UNKNOWN_STATUS:
                session.log_obligation(base, None, wallb)
                session.set_verdict(VERDICT_UNKNOWN, reason=base.reason)
                return session
            cid = session.add_cex(base.cex)
            session.log_obligation(base, cid, wallb)
            outcome = _process_cex(session, provider, base, cid)
        if outcome in ("violation", "abort"):
            return session
        # "continue" or "reset": next iteration

    session.set_verdict(VERDICT_UNKNOWN, reason="iteration-cap")
    return session


def _per_signal_iteration(session, provider, cfg, options) -> str:
    """One loop iteration via the per-register split. Returns the same
    outcome vocabulary as _process_cex plus 'hold'."""
    n = session.netlist
    ledger = session.ledger
    results = schedule_parallel(n, ledger, options.workers, cfg, options.use_coi)
    cids = {}
    for z, res in results.items():
        cid = session.add_cex(res.cex) if res.cex else None
        cids[z] = cid
        session.log_obligation(res, cid, res.stats.get("time", 0.0))
    for z, res in results.items():
        if res.status == UNKNOWN_STATUS:
            session.set_verdict(VERDICT_UNKNOWN, reason=res.reason)
            return "abort"
    for z, res in results.items():
        if res.status == VIOLATED:
            return _process_cex(session, provider, res, cids[z])
    saw_candidate = False
    for z, res in results.items():
        if res.status != CANDIDATE:
            continue
        saw_candidate = True
        outcome = _process_cex(session, provider, res, cids[z])
        if outcome != "continue":
            return outcome
    return "continue" if saw_candidate else "hold"


def _run_bughunt(session, cfg, options):
    """Single bounded proof with a manually supplied control set; no
    refinement. A hold is reported as unknown ("no violation found"),
    never as a data-obliviousness proof."""
    n = session.netlist
    m = build_miter(n, session.ledger)
    t0 = time.perf_counter()
    result = check_unrolled(m, session.ledger, options.k, cfg)
    wall = time.perf_counter() - t0
    cid = session.add_cex(result.cex) if result.cex else None
    session.log_obligation(result, cid, wall)
    session.iterations += 1
    if result.status == VIOLATED:
        session.set_verdict(VERDICT_VIOLATION, cex_id=cid)
    elif result.status == HOLD:
        session.set_verdict(
            VERDICT_UNKNOWN, reason="bughunt: no violation found within k=%d (non-exhaustive)" % options.k
        )
    elif result.status == CANDIDATE:
        session.set_verdict(
            VERDICT_UNKNOWN,
            reason="bughunt: propagation into unclassified registers; extend the manual control set",
            cex_id=cid,
        )
    else:
        session.set_verdict(VERDICT_UNKNOWN, reason=result.reason)
    return session


def _assemble_verdict(session):
    ledger = session.ledger
    if ledger.has_exclusions():
        session.set_verdict(VERDICT_DO_PHI, exclusions=ledger.exclusions(),
                            invariants=[nm for nm, _ in ledger.invariants])
    else:
        session.set_verdict(VERDICT_DO, invariants=[nm for nm, _ in ledger.invariants])


def _apply_update(session, provider, decision: Decision):
    ledger = session.ledger
    for nm, e in decision.constraints:
        ledger.add_phi(nm, e)
    for nm, e in decision.invariants:
        ledger.add_invariant(nm, e)
    for a, b in decision.crosseqs:
        ledger.add_cross_equality(a, b)
    ledger.reset_zc()


def _process_cex(session, provider, result, cex_id) -> str:
    """Walk the counterexample's diffs, consult the provider and apply
    the decisions. Returns 'violation', 'continue' or 'abort'."""
    cex = result.cex
    ledger = session.ledger

    if result.reason == "invariant-refuted":
        refuted = [d.loc for d in cex.diffs if d.kind == KIND_INVARIANT]
        session.set_verdict(
            VERDICT_UNKNOWN,
            reason="invariant-refuted: %s" % ", ".join(refuted),
            cex_id=cex_id,
        )
        return "abort"

    if result.status == VIOLATED:
        loc_diff = next(
            (d for d in cex.diffs if d.kind in CONTROL_VISIBLE or
             (d.kind == KIND_BOX_INPUT and _box_input_role(session.netlist, d.loc) == CONTROL)),
            None,
        )
        if loc_diff is None:
            loc_diff = cex.diffs[0]
        if options_strict(session):
            session.log_decision(cex_id, loc_diff.loc, {"kind": "violation-strict"})
            session.set_verdict(VERDICT_VIOLATION, cex_id=cex_id, location=loc_diff.loc)
            return "violation"
        query = DecisionQuery(cex_id, loc_diff.loc, loc_diff.kind, loc_diff.cycle, "violation")
        try:
            d = provider.decide(query)
        except ProviderError as e:
            session.log_decision(cex_id, loc_diff.loc, {"kind": "provider-error"}, str(e))
            session.set_verdict(VERDICT_UNKNOWN, reason="provider: %s" % e, cex_id=cex_id)
            return "abort"
        session.log_decision(cex_id, loc_diff.loc, d.to_json(), d.rationale)
        if d.kind == DECIDE_INVALID:
            _apply_update(session, provider, d)
            return "reset"
        # an output/control-visible divergence cannot be classified away
        session.set_verdict(VERDICT_VIOLATION, cex_id=cex_id, location=loc_diff.loc)
        return "violation"

    # candidate propagation: iterate the complete set of classifiable
    # locations (the engine's per-location analysis), falling back to
    # the diffs of the witness trace itself
    worklist = result.diff_candidates or cex.diffs
    seen = set()
    for diff in worklist:
        if diff.kind not in (KIND_STATE, KIND_BOX_INPUT):
            continue
        if diff.kind == KIND_BOX_INPUT and _box_input_role(session.netlist, diff.loc) != DATA:
            continue
        if diff.loc in seen:
            continue
        seen.add(diff.loc)
        query = DecisionQuery(cex_id, diff.loc, diff.kind, diff.cycle, "data")
        try:
            d = provider.decide(query)
        except ProviderError as e:
            session.log_decision(cex_id, diff.loc, {"kind": "provider-error"}, str(e))
            session.set_verdict(VERDICT_UNKNOWN, reason="provider: %s" % e, cex_id=cex_id)
            return "abort"
        session.log_decision(cex_id, diff.loc, d.to_json(), d.rationale)
        if d.kind == DECIDE_DATA:
            if diff.kind == KIND_BOX_INPUT:
                ledger.accept_box_flow(diff.loc)
            else:
                ledger.classify(diff.loc, DATA, provider.provenance)
        elif d.kind == DECIDE_CONTROL:
            if diff.kind != KIND_BOX_INPUT:
                ledger.classify(diff.loc, CONTROL, provider.provenance)
            session.set_verdict(VERDICT_VIOLATION, cex_id=cex_id, location=diff.loc)
            return "violation"
        elif d.kind == DECIDE_INVALID:
            _apply_update(session, provider, d)
            return "reset"
    return "continue"


def _box_input_role(n, qualified):
    box, port = qualified.split(".", 1)
    for b in n.boxes:
        if b.name == box:
            for i in b.inputs:
                if i.name == port:
                    return i.role
    return None


def options_strict(session):
    return getattr(session, "strict_alg1", False)


def run_campaign(n, rules: Rules | None = None, provider=None,
                 cfg: EngineConfig | None = None, options: RunOptions | None = None,
                 seed: int = 0, netlist_path: str = "",
                 preset_classes: bool = False) -> Session:
    """Convenience wrapper: build a session, apply rule presets, run."""
    from .sidecar import apply_presets

    options = options or RunOptions()
    session = Session(n, mode=options.mode, seed=seed, netlist_path=netlist_path)
    session.strict_alg1 = options.strict_alg1
    if rules is not None:
        apply_presets(
            session.ledger, rules,
            include_class=preset_classes or options.mode == "bughunt",
        )
        session.opclasses = [[nm, str(e)] for nm, e in rules.opclasses]
        if provider is None:
            provider = ScriptedProvider(rules)
    if provider is None:
        raise ProviderError("a provider or rules file is required")
    return run_upec_dit(session, provider, cfg, options)
