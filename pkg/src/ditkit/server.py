"""Local HTTP session service for the browser companion.

One service owns one session. All mutations (decisions, constraint
authoring, job completions) are serialized through a single lock and
persisted atomically to the session file. Proof jobs run asynchronously
against a read-only snapshot of the ledger and publish their results as
server-sent events on /api/events.

Endpoints (JSON unless noted):
    GET  /api/session            ledger, verdict, logs, cex ids
    GET  /api/cex/{id}           counterexample (diffs + both traces)
    GET  /api/trace/{id}         the two-instance trace only
    POST /api/decision           {cexId, location, decision}
    POST /api/constraint         {name, expr}
    POST /api/invariant          {name, expr}
    POST /api/crosseq            {a, b}
    POST /api/prove              {mode, k?, warmup?, signal?} -> {job}
    GET  /api/job/{id}           job status/result
    GET  /api/events             server-sent event stream
"""

from __future__ import annotations

import json
import queue
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .driver import DECIDE_CONTROL, DECIDE_DATA, DECIDE_INVALID
from .engine import (
    HOLD,
    VIOLATED,
    EngineConfig,
    check_base,
    check_signal,
    check_step,
    check_unrolled,
    check_unrolled_io,
)
from .fmt import ParseError, parse_expr_text
from .miter import DATA, LedgerError, PROV_USER, PartitionLedger, build_miter
from .session import (
    VERDICT_DO,
    VERDICT_DO_PHI,
    VERDICT_UNKNOWN,
    VERDICT_VIOLATION,
    Session,
    save_session,
)


class ApiError(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status


class SessionService:
    """Owns the session; every public method is safe to call from
    request-handler threads."""

    def __init__(self, session: Session, session_path: str | None = None,
                 cfg: EngineConfig | None = None):
        self.session = session
        self.session_path = session_path
        self.cfg = cfg or EngineConfig()
        self.lock = threading.RLock()
        self.jobs: dict[str, dict] = {}
        self._job_seq = 0
        self._subscribers: list[queue.Queue] = []
        self._decided: set[tuple[str, str]] = set()
        for rec in session.decisions:
            self._decided.add((rec["cex_id"], rec["location"]))

    # -- events -----------------------------------------------------------

    def subscribe(self) -> queue.Queue:
        q = queue.Queue()
        with self.lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q):
        with self.lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _emit(self, event: dict):
        for q in list(self._subscribers):
            q.put(event)

    def _persist(self):
        if self.session_path:
            save_session(self.session, self.session_path)

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> dict:
        with self.lock:
            s = self.session
            led = s.ledger
            return {
                "design": s.netlist.name,
                "netlist_sha256": s.hash,
                "mode": s.mode,
                "verdict": s.verdict,
                "iterations": s.iterations,
                "ledger": led.to_json(),
                "z_c": led.z_c(),
                "z_d": led.z_d(),
                "exclusions": led.exclusions(),
                "obligations": s.obligations,
                "decisions": s.decisions,
                "cex_ids": list(s.cexs),
                "pending": self.pending_locations(),
                "obligations_digest": s.obligations_digest(),
                "registers": [
                    {"name": r.name, "width": r.width, "init": r.init}
                    for r in s.netlist.regs
                ],
                "outputs": [
                    {"name": p.name, "width": p.width, "role": p.role}
                    for p in s.netlist.outputs
                ],
            }

    def pending_locations(self):
        """Classifiable diff locations of the newest counterexample that
        have no recorded decision yet, using the engine's complete
        per-location analysis when present."""
        s = self.session
        if not s.cexs:
            return []
        cid = list(s.cexs)[-1]
        cex = s.cexs[cid]
        from .engine import Diff

        diffs = [
            Diff(d["loc"], d["cycle"], d["kind"])
            for o in reversed(s.obligations)
            if o["cex_id"] == cid
            for d in o.get("diff_candidates", [])
        ]
        if not diffs:
            diffs = cex.diffs
        out = []
        seen = set()
        for d in diffs:
            if d.loc in seen or (cid, d.loc) in self._decided:
                continue
            seen.add(d.loc)
            out.append({"cexId": cid, "location": d.loc, "kind": d.kind, "cycle": d.cycle})
        return out

    def get_cex(self, cid):
        with self.lock:
            if cid not in self.session.cexs:
                raise ApiError(404, "unknown counterexample %r" % cid)
            return self.session.cexs[cid].to_json()

    def get_trace(self, cid):
        data = self.get_cex(cid)
        return {"design": data["design"], "k": data["k"], "instances": data["instances"]}

    # -- mutations ---------------------------------------------------------------

    def post_decision(self, body):
        cid = body.get("cexId")
        loc = body.get("location")
        dec = body.get("decision") or {}
        kind = dec.get("kind")
        with self.lock:
            s = self.session
            if cid not in s.cexs:
                raise ApiError(404, "unknown counterexample %r" % cid)
            cex = s.cexs[cid]
            diff = next((d for d in cex.diffs if d.loc == loc), None)
            if diff is None:
                raise ApiError(404, "location %r is not part of %s" % (loc, cid))
            if (cid, loc) in self._decided:
                raise ApiError(409, "location %r of %s is already decided" % (loc, cid))
            if kind == DECIDE_DATA:
                if diff.kind == "box-input":
                    try:
                        s.ledger.accept_box_flow(loc)
                    except LedgerError as e:
                        raise ApiError(422, str(e)) from None
                elif diff.kind in ("state", "control-state"):
                    s.ledger.classify(loc, DATA, PROV_USER)
                else:
                    raise ApiError(422, "an output divergence cannot be classified as data")
            elif kind == DECIDE_CONTROL:
                if diff.kind in ("state", "control-state"):
                    s.ledger.classify(loc, "control", PROV_USER)
                s.set_verdict(VERDICT_VIOLATION, cex_id=cid, location=loc)
            elif kind == DECIDE_INVALID:
                applied = self._apply_entries(dec)
                if not applied:
                    raise ApiError(422, "an invalid-counterexample decision must add an entry")
                s.ledger.reset_zc()
                self._decided = {(c, l) for (c, l) in self._decided if c != cid}
            else:
                raise ApiError(422, "unknown decision kind %r" % kind)
            s.log_decision(cid, loc, {k: v for k, v in dec.items()}, dec.get("rationale", "ui"))
            self._decided.add((cid, loc))
            self._persist()
            snap_verdict = dict(s.verdict)
        self._emit({"type": "decision", "cexId": cid, "location": loc, "verdict": snap_verdict})
        return {"ok": True, "verdict": snap_verdict}

    def _apply_entries(self, dec):
        applied = 0
        try:
            for nm, txt in dec.get("constraints", []):
                self.session.ledger.add_phi(nm, parse_expr_text(txt))
                applied += 1
            for nm, txt in dec.get("invariants", []):
                self.session.ledger.add_invariant(nm, parse_expr_text(txt))
                applied += 1
            for a, b in dec.get("crosseqs", []):
                self.session.ledger.add_cross_equality(a, b)
                applied += 1
        except (ParseError, LedgerError) as e:
            raise ApiError(422, str(e)) from None
        return applied

    def post_entry(self, what, body):
        with self.lock:
            try:
                if what == "constraint":
                    self.session.ledger.add_phi(body["name"], parse_expr_text(body["expr"]))
                elif what == "invariant":
                    self.session.ledger.add_invariant(body["name"], parse_expr_text(body["expr"]))
                else:
                    self.session.ledger.add_cross_equality(body["a"], body["b"])
            except (ParseError, LedgerError, KeyError) as e:
                raise ApiError(422, str(e)) from None
            self.session.ledger.reset_zc()
            self.session.log_decision(
                None, what, {"kind": "author-" + what, **{k: v for k, v in body.items()}}
            )
            self._persist()
        self._emit({"type": "ledger", "what": what})
        return {"ok": True}

    # -- proofs --------------------------------------------------------------------

    def post_prove(self, body):
        mode = body.get("mode", "step")
        if mode not in ("step", "base", "unrolled", "unrolled-io", "per-signal"):
            raise ApiError(422, "unknown prove mode %r" % mode)
        with self.lock:
            self._job_seq += 1
            job_id = "job-%d" % self._job_seq
            self.jobs[job_id] = {"id": job_id, "state": "running", "mode": mode}
            ledger_snapshot = PartitionLedger.from_json(
                self.session.netlist, self.session.ledger.to_json()
            )
        t = threading.Thread(
            target=self._run_job, args=(job_id, mode, body, ledger_snapshot), daemon=True
        )
        t.start()
        return {"job": job_id}

    def _run_job(self, job_id, mode, body, ledger):
        s = self.session
        n = s.netlist
        t0 = time.perf_counter()
        try:
            m = build_miter(n, ledger)
            if mode == "step":
                res = check_step(m, ledger, self.cfg)
            elif mode == "base":
                res = check_base(m, ledger, int(body.get("warmup", 0)), self.cfg)
            elif mode == "unrolled":
                res = check_unrolled(m, ledger, int(body.get("k", 4)), self.cfg)
            elif mode == "unrolled-io":
                res = check_unrolled_io(m, ledger, int(body.get("k", 4)), self.cfg)
            else:
                res = check_signal(m, ledger, body.get("signal"), self.cfg)
        except Exception as e:  # job failures surface in the job record
            with self.lock:
                self.jobs[job_id] = {"id": job_id, "state": "failed", "error": str(e)}
            self._emit({"type": "job", "job": dict(self.jobs[job_id])})
            return
        wall = time.perf_counter() - t0
        with self.lock:
            cid = s.add_cex(res.cex) if res.cex is not None else None
            s.log_obligation(res, cid, wall)
            self._maybe_assemble_verdict(res)
            self.jobs[job_id] = {
                "id": job_id,
                "state": "done",
                "mode": mode,
                "status": res.status,
                "reason": res.reason,
                "cex_id": cid,
                "stats": res.stats,
            }
            self._persist()
            job_snapshot = dict(self.jobs[job_id])
            verdict = dict(s.verdict)
        self._emit({"type": "job", "job": job_snapshot, "verdict": verdict})
        if cid:
            self._emit({"type": "cex", "cexId": cid})

    def _maybe_assemble_verdict(self, res):
        """Mirror the scripted driver's endings: a held base obligation
        directly after a held step/unrolled obligation closes the proof."""
        s = self.session
        if res.obligation.kind == "base" and res.status == HOLD and len(s.obligations) >= 2:
            prev = s.obligations[-2]
            if prev["status"] == HOLD and prev["obligation"]["kind"] in ("step", "unrolled"):
                if s.ledger.has_exclusions():
                    s.set_verdict(VERDICT_DO_PHI, exclusions=s.ledger.exclusions(),
                                  invariants=[nm for nm, _ in s.ledger.invariants])
                else:
                    s.set_verdict(VERDICT_DO,
                                  invariants=[nm for nm, _ in s.ledger.invariants])
        if res.status == VIOLATED and res.reason == "invariant-refuted":
            s.set_verdict(VERDICT_UNKNOWN, reason="invariant-refuted")

    def get_job(self, job_id):
        with self.lock:
            if job_id not in self.jobs:
                raise ApiError(404, "unknown job %r" % job_id)
            return dict(self.jobs[job_id])


def make_handler(service: SessionService, ui_dir: str | None):
    import os

    if ui_dir is not None:
        ui_dir = os.path.abspath(ui_dir)

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _json(self, obj, status=200):
            data = json.dumps(obj).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self):
            length = int(self.headers.get("Content-Length", 0))
            if not length:
                return {}
            try:
                return json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                raise ApiError(422, "request body is not valid JSON") from None

        def do_GET(self):
            try:
                if self.path == "/api/session":
                    return self._json(service.snapshot())
                if self.path.startswith("/api/cex/"):
                    return self._json(service.get_cex(self.path.rsplit("/", 1)[1]))
                if self.path.startswith("/api/trace/"):
                    return self._json(service.get_trace(self.path.rsplit("/", 1)[1]))
                if self.path.startswith("/api/job/"):
                    return self._json(service.get_job(self.path.rsplit("/", 1)[1]))
                if self.path == "/api/events":
                    return self._events()
                return self._static()
            except ApiError as e:
                return self._json({"error": str(e)}, e.status)

        def do_POST(self):
            try:
                body = self._body()
                if self.path == "/api/decision":
                    return self._json(service.post_decision(body))
                if self.path == "/api/constraint":
                    return self._json(service.post_entry("constraint", body))
                if self.path == "/api/invariant":
                    return self._json(service.post_entry("invariant", body))
                if self.path == "/api/crosseq":
                    return self._json(service.post_entry("crosseq", body))
                if self.path == "/api/prove":
                    return self._json(service.post_prove(body))
                return self._json({"error": "not found"}, 404)
            except ApiError as e:
                return self._json({"error": str(e)}, e.status)

        def _events(self):
            q = service.subscribe()
            try:
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Cache-Control", "no-cache")
                self.end_headers()
                self.wfile.write(b": connected\n\n")
                self.wfile.flush()
                while True:
                    try:
                        event = q.get(timeout=15)
                        payload = "data: %s\n\n" % json.dumps(event)
                        self.wfile.write(payload.encode())
                    except queue.Empty:
                        self.wfile.write(b": ping\n\n")
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                pass
            finally:
                service.unsubscribe(q)

        def _static(self):
            if ui_dir is None:
                return self._json({"error": "not found"}, 404)
            rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
            path = os.path.normpath(os.path.join(ui_dir, rel))
            if not path.startswith(os.path.abspath(ui_dir)):
                return self._json({"error": "not found"}, 404)
            if not os.path.isfile(path):
                return self._json({"error": "not found"}, 404)
            ctype = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".json": "application/json",
                ".svg": "image/svg+xml",
            }.get(os.path.splitext(path)[1], "application/octet-stream")
            with open(path, "rb") as f:
                data = f.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler


def make_server(session: Session, port: int = 0, session_path=None, ui_dir=None,
                cfg: EngineConfig | None = None):
    service = SessionService(session, session_path, cfg)
    handler = make_handler(service, ui_dir)
    httpd = ThreadingHTTPServer(("127.0.0.1", port), handler)
    httpd.service = service
    return httpd


def serve(session: Session, port: int = 8321, session_path=None, ui_dir=None):
    import os
    import sys

    if ui_dir is None:
        guess = os.path.join(os.getcwd(), "frontend", "dist")
        ui_dir = guess if os.path.isdir(guess) else None
    if ui_dir is not None:
        ui_dir = os.path.abspath(ui_dir)
    httpd = make_server(session, port, session_path, ui_dir)
    print("serving %s on http://127.0.0.1:%d/ (ui: %s)" % (
        session.netlist.name, httpd.server_address[1], ui_dir or "none"
    ), file=sys.stderr)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
