"""Campaign reports: markdown and JSON renderings of a session.

Every claim in a report is backed by an entry in the session's
obligation log; the exclusion list (input constraints, cross-equalities,
accepted box flows, box modes) is rendered verbatim as the trust
assumptions of the verdict. Designs tagged with operation classes get a
per-class summary table: a class counts as excluded when it is
unsatisfiable under the active constraints, as violating when the
recorded counterexample exercises it, and as covered by the verdict
otherwise.
"""

from __future__ import annotations

import json

import numpy as np

from .fmt import parse_expr_text
from .session import Session
from .sim import BatchSim

_U64 = np.uint64


def _inputs_sat(n, exprs, cap_bits=20):
    """Is the conjunction of width-1 input expressions satisfiable by
    some single-cycle input valuation? Enumeration-based; None when the
    input space is too large to enumerate."""
    total = sum(p.width for p in n.inputs)
    if total > cap_bits:
        return None
    lanes = 1 << total
    idx = np.arange(lanes, dtype=_U64)
    values = {}
    off = 0
    for p in n.inputs:
        values[p.name] = (idx >> _U64(off)) & _U64((1 << p.width) - 1)
        off += p.width
    bs = BatchSim(n, lanes)
    ok = np.ones(lanes, dtype=bool)
    for e in exprs:
        ok &= bs.eval_predicate(e, values).astype(bool)
    return bool(ok.any())


def _cex_matches_class(session, cex, class_expr):
    """Does the recorded counterexample issue an input valuation of the
    class at some cycle (in either instance)?"""
    n = session.netlist
    bs = BatchSim(n, 1)
    for inst in ("A", "B"):
        vals = cex.values[inst]
        for t in range(cex.window + 1):
            row = {p.name: np.array([vals[p.name][t]], dtype=_U64) for p in n.inputs}
            if bool(bs.eval_predicate(class_expr, row)[0]):
                return True
    return False


def opclass_table(session: Session) -> list[dict]:
    rows = []
    phi_exprs = [e for _, e in session.ledger.phi]
    verdict = session.verdict.get("kind")
    vio_cex = None
    if verdict == "violation" and session.verdict.get("cex_id") in session.cexs:
        vio_cex = session.cexs[session.verdict["cex_id"]]
    for name, expr_text in getattr(session, "opclasses", []):
        e = parse_expr_text(expr_text)
        sat = _inputs_sat(session.netlist, phi_exprs + [e])
        if sat is False:
            status = "excluded"
        elif verdict in ("do", "do-phi"):
            status = "data-independent"
        elif verdict == "violation":
            if vio_cex is not None and _cex_matches_class(session, vio_cex, e):
                status = "violates"
            else:
                status = "not-implicated"
        else:
            status = "unknown"
        rows.append({"class": name, "status": status})
    return rows


_STATUS_MARK = {
    "data-independent": "yes",
    "excluded": "only under constraint",
    "violates": "NO",
    "not-implicated": "(see counterexample)",
    "unknown": "?",
}


def report_json(session: Session) -> dict:
    n = session.netlist
    led = session.ledger
    return {
        "design": {
            "name": n.name,
            "inputs": [{"name": p.name, "width": p.width, "role": p.role} for p in n.inputs],
            "outputs": [{"name": p.name, "width": p.width, "role": p.role} for p in n.outputs],
            "registers": len(n.regs),
            "state_bits": sum(r.width for r in n.regs),
            "boxes": [b.name for b in n.boxes],
            "observations": list(n.observations),
            "sha256": session.hash,
        },
        "mode": session.mode,
        "seed": session.seed,
        "iterations": session.iterations,
        "verdict": session.verdict,
        "exclusions": led.exclusions(),
        "invariants": [{"name": nm, "expr": str(e)} for nm, e in led.invariants],
        "box_modes": dict(led.box_modes),
        "classification": {
            r.name: {
                "class": led.state_class[r.name].role,
                "provenance": led.state_class[r.name].provenance,
            }
            for r in n.regs
        },
        "obligations": session.obligations,
        "decisions": session.decisions,
        "operation_classes": opclass_table(session),
        "counterexamples": {
            cid: [d.to_json() for d in cex.diffs] for cid, cex in session.cexs.items()
        },
        "obligations_digest": session.obligations_digest(),
    }


def report_markdown(session: Session) -> str:
    d = report_json(session)
    n = session.netlist
    led = session.ledger
    lines = []
    w = lines.append
    w("# Data-oblivious verification report: %s" % n.name)
    w("")
    verdict = session.verdict.get("kind", "pending")
    extra = ""
    if verdict == "violation":
        extra = " (counterexample %s at %s)" % (
            session.verdict.get("cex_id"),
            session.verdict.get("location", "?"),
        )
    elif verdict == "unknown":
        extra = " (%s)" % session.verdict.get("reason", "")
    w("## Verdict: %s%s" % (verdict.upper(), extra))
    w("")
    w("- design: `%s` (%d registers, %d state bits, sha256 `%s...`)" % (
        n.name, len(n.regs), d["design"]["state_bits"], session.hash[:12]))
    w("- mode: %s, iterations: %d, obligations: %d" % (
        session.mode, session.iterations, len(session.obligations)))
    w("")
    w("## Interface partition")
    w("")
    w("| port | dir | width | role |")
    w("|---|---|---|---|")
    for p in n.inputs:
        w("| %s | in | %d | %s |" % (p.name, p.width, p.role))
    for p in n.outputs:
        w("| %s | out | %d | %s |" % (p.name, p.width, p.role))
    w("")
    ex = d["exclusions"]
    if any(ex.values()) or d["invariants"]:
        w("## Trust assumptions and exclusions")
        w("")
        for nm, txt in ex["constraints"]:
            w("- input constraint `%s`: `%s`" % (nm, txt))
        for a, b in ex["cross_equalities"]:
            w("- cross-instance equality assumed: `%s` = `%s`" % (a, b))
        for q in ex["accepted_box_flows"]:
            w("- accepted data flow into black box: `%s`" % q)
        for b in ex["verified_do_boxes"]:
            w("- box `%s` assumed data-oblivious (verified-do mode)" % b)
        for inv in d["invariants"]:
            w("- invariant `%s` (proven inductively): `%s`" % (inv["name"], inv["expr"]))
        w("")
    if d["operation_classes"]:
        w("## Operation classes")
        w("")
        w("| class | data-independent timing |")
        w("|---|---|")
        for row in d["operation_classes"]:
            w("| %s | %s |" % (row["class"], _STATUS_MARK.get(row["status"], row["status"])))
        w("")
    w("## State classification")
    w("")
    w("| register | class | provenance |")
    w("|---|---|---|")
    for r in n.regs:
        c = led.state_class[r.name]
        w("| %s | %s | %s |" % (r.name, c.role, c.provenance))
    w("")
    w("## Proof obligations")
    w("")
    w("| # | kind | window | status | vars | clauses | time (s) |")
    w("|---|---|---|---|---|---|---|")
    for o in session.obligations:
        ob = o["obligation"]
        target = (":%s" % ob["target"]) if ob.get("target") else ""
        w("| %d | %s%s | %d | %s | %d | %d | %.3f |" % (
            o["seq"], ob["kind"], target, ob["window"], o["status"],
            o["stats"].get("vars", 0), o["stats"].get("clauses", 0),
            o["wall_time"]))
    w("")
    if session.cexs:
        w("## Counterexamples")
        w("")
        for cid, cex in session.cexs.items():
            diffs = ", ".join("%s@%d (%s)" % (x.loc, x.cycle, x.kind) for x in cex.diffs[:6])
            more = "" if len(cex.diffs) <= 6 else " (+%d more)" % (len(cex.diffs) - 6)
            w("- `%s` [%s k=%d]: %s%s" % (cid, cex.obligation.kind, cex.window, diffs, more))
        w("")
    w("Obligations digest: `%s`" % d["obligations_digest"])
    w("")
    return "\n".join(lines)


def render_report(session: Session, fmt: str = "md") -> str:
    if fmt == "json":
        return json.dumps(report_json(session), indent=2, sort_keys=True)
    if fmt == "md":
        return report_markdown(session)
    raise ValueError("unknown report format %r" % fmt)
