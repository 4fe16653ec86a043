"""Campaign sessions: the persistent record of one verification run.

A session owns the ledger, the obligation log (every proof run with its
status and stats), the decisions log (every provider answer), the
counterexample store and the final verdict. Sessions round-trip through
a versioned JSON file; the netlist's content hash guards against
resuming a session on a modified design. File writes are atomic
(write-then-rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import time

from .engine import Counterexample, Diff, ObligationSpec
from .fmt import parse_netlist, pretty_print
from .miter import PartitionLedger
from .netlist import Netlist

SCHEMA = "dit-session/1"

VERDICT_PENDING = "pending"
VERDICT_DO = "do"
VERDICT_DO_PHI = "do-phi"
VERDICT_VIOLATION = "violation"
VERDICT_UNKNOWN = "unknown"


class SessionError(ValueError):
    pass


def netlist_hash(n: Netlist) -> str:
    return hashlib.sha256(pretty_print(n).encode()).hexdigest()


class Session:
    def __init__(self, n: Netlist, mode: str = "inductive", seed: int = 0,
                 netlist_path: str = ""):
        self.netlist = n
        self.netlist_path = netlist_path
        self.hash = netlist_hash(n)
        self.mode = mode
        self.seed = seed
        self.ledger = PartitionLedger(n)
        self.obligations: list[dict] = []
        self.decisions: list[dict] = []
        self.cexs: dict[str, Counterexample] = {}
        self.verdict: dict = {"kind": VERDICT_PENDING}
        self.iterations = 0
        self.opclasses: list[list[str]] = []  # [name, expr-text] pairs for reports

    # -- logging -------------------------------------------------------------

    def new_cex_id(self) -> str:
        return "cex-%d" % (len(self.cexs) + 1)

    def add_cex(self, cex: Counterexample) -> str:
        cid = self.new_cex_id()
        self.cexs[cid] = cex
        return cid

    def log_obligation(self, result, cex_id=None, wall_time=0.0):
        self.obligations.append(
            {
                "seq": len(self.obligations),
                "obligation": result.obligation.to_json(),
                "status": result.status,
                "reason": result.reason,
                "cex_id": cex_id,
                "stats": dict(result.stats),
                "wall_time": wall_time,
                "diff_candidates": [d.to_json() for d in getattr(result, "diff_candidates", [])],
            }
        )

    def log_decision(self, cex_id, location, decision_json, rationale=""):
        self.decisions.append(
            {
                "seq": len(self.decisions),
                "cex_id": cex_id,
                "location": location,
                "decision": decision_json,
                "rationale": rationale,
                "time": time.time(),
            }
        )

    def set_verdict(self, kind, **kw):
        self.verdict = {"kind": kind, **kw}

    # -- digests ---------------------------------------------------------------

    def obligations_digest(self) -> str:
        """Stable hash of the obligation log (volatile fields excluded)."""
        entries = [
            {
                "seq": o["seq"],
                "obligation": o["obligation"],
                "status": o["status"],
                "reason": o["reason"],
                "cex_id": o["cex_id"],
            }
            for o in self.obligations
        ]
        blob = json.dumps(entries, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    # -- persistence -------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "design": self.netlist.name,
            "netlist_path": self.netlist_path,
            "netlist_sha256": self.hash,
            "netlist_text": pretty_print(self.netlist),
            "mode": self.mode,
            "seed": self.seed,
            "iterations": self.iterations,
            "ledger": self.ledger.to_json(),
            "obligations": self.obligations,
            "decisions": self.decisions,
            "cexs": {cid: cex.to_json() for cid, cex in self.cexs.items()},
            "verdict": self.verdict,
            "opclasses": [list(x) for x in self.opclasses],
        }

    @classmethod
    def from_json(cls, data: dict, netlist: Netlist | None = None) -> "Session":
        if data.get("schema") != SCHEMA:
            raise SessionError(
                "unsupported session schema %r (expected %r)" % (data.get("schema"), SCHEMA)
            )
        n = netlist if netlist is not None else parse_netlist(data["netlist_text"])
        s = cls(n, mode=data["mode"], seed=data["seed"], netlist_path=data.get("netlist_path", ""))
        if s.hash != data["netlist_sha256"]:
            raise SessionError(
                "netlist hash mismatch: session was recorded against a different design"
            )
        s.ledger = PartitionLedger.from_json(n, data["ledger"])
        s.obligations = list(data["obligations"])
        s.decisions = list(data["decisions"])
        s.iterations = data.get("iterations", 0)
        s.cexs = {cid: _cex_from_json(c) for cid, c in data["cexs"].items()}
        s.verdict = dict(data["verdict"])
        s.opclasses = [list(x) for x in data.get("opclasses", [])]
        return s


def _cex_from_json(d: dict) -> Counterexample:
    spec = ObligationSpec(
        d["obligation"]["kind"], d["obligation"]["window"], d["obligation"].get("target")
    )
    return Counterexample(
        design=d["design"],
        obligation=spec,
        window=d["k"],
        values={inst: {sig: list(v) for sig, v in m.items()} for inst, m in d["instances"].items()},
        diffs=[Diff(x["loc"], x["cycle"], x["kind"]) for x in d["diffs"]],
    )


def save_session(session: Session, path: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(session.to_json(), f, indent=1, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def load_session(path: str, netlist: Netlist | None = None) -> Session:
    with open(path) as f:
        data = json.load(f)
    return Session.from_json(data, netlist)
