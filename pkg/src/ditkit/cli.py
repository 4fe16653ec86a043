"""Command-line front end.

Exit codes: 0 for a data-oblivious verdict (plain or input-constrained)
or a produced artifact, 1 for a violation verdict, 2 for unknown,
64 for usage errors, 65 for input/parse errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .aiger import AigerError, import_aiger
from .driver import RunOptions, run_campaign
from .engine import (
    EngineConfig,
    check_base,
    check_signal,
    check_step,
    check_unrolled,
    check_unrolled_io,
)
from .fmt import ParseError, parse_netlist
from .miter import LedgerError, PartitionLedger, build_miter, coi_candidates
from .oracles import OracleError, oracle_exhaustive, oracle_random
from .report import render_report
from .sat import ExternalSolver
from .session import Session, SessionError, load_session, save_session
from .sidecar import apply_presets, apply_roles, parse_rules
from .sim import SimulationError, simulate

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 64
EXIT_DATA = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print("%s: error: %s" % (self.prog, message), file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class CliError(Exception):
    pass


def _load_rules(path):
    if path is None:
        return None
    with open(path) as f:
        return parse_rules(f.read())


def _load_design(path, rules=None):
    with open(path, "rb") as f:
        data = f.read()
    if path.endswith(".aag") or data[:4] in (b"aag ", b"aig "):
        n = import_aiger(data)
    else:
        n = parse_netlist(data.decode())
    if rules is not None and rules.role_overrides:
        n = apply_roles(n, rules)
    return n


def _engine_config(args):
    cfg = EngineConfig()
    if getattr(args, "solver_cmd", None):
        cfg.solver = ExternalSolver(args.solver_cmd.split())
    if getattr(args, "max_conflicts", None):
        cfg.max_conflicts = args.max_conflicts
    return cfg


def _parse_stimuli(text, n):
    """Stimuli file: lines `cycle <n> <name>=<uint> ...`."""
    rows = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] != "cycle" or len(toks) < 2:
            raise CliError("stimuli line %d: expected 'cycle <n> name=value ...'" % line_no)
        t = int(toks[1])
        row = rows.setdefault(t, {})
        for pair in toks[2:]:
            if "=" not in pair:
                raise CliError("stimuli line %d: expected name=value, got %r" % (line_no, pair))
            name, val = pair.split("=", 1)
            row[name] = int(val, 0)
    if not rows:
        return [], []
    cycles = max(rows) + 1
    input_names = {p.name for p in n.inputs}
    box_names = {o.name for o in n.box_output_signals()}
    inputs, boxes = [], []
    for t in range(cycles):
        row = rows.get(t, {})
        inputs.append({k: v for k, v in row.items() if k in input_names})
        boxes.append({k: v for k, v in row.items() if k in box_names})
        for k in row:
            if k not in input_names and k not in box_names:
                raise CliError("stimuli name %r is not an input or box output" % k)
    return inputs, boxes


def cmd_parse(args):
    rules = _load_rules(args.roles)
    n = _load_design(args.file, rules)
    info = {
        "name": n.name,
        "inputs": [{"name": p.name, "width": p.width, "role": p.role} for p in n.inputs],
        "outputs": [{"name": p.name, "width": p.width, "role": p.role} for p in n.outputs],
        "registers": [
            {"name": r.name, "width": r.width, "init": r.init} for r in n.regs
        ],
        "wires": len(n.wires),
        "boxes": [b.name for b in n.boxes],
        "observations": list(n.observations),
    }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_simulate(args):
    n = _load_design(args.file, _load_rules(args.roles))
    with open(args.stimuli) as f:
        inputs, boxes = _parse_stimuli(f.read(), n)
    tr = simulate(
        n,
        inputs=inputs,
        box_outputs=boxes if n.boxes else None,
        default_uninit=args.uninit,
    )
    print(json.dumps({"cycles": tr.length, "values": tr.values}, indent=2))
    return EXIT_OK


def cmd_prove(args):
    rules = _load_rules(args.rules)
    n = _load_design(args.file, rules)
    ledger = PartitionLedger(n)
    if rules is not None:
        apply_presets(ledger, rules, include_class=True)
    m = build_miter(n, ledger)
    cfg = _engine_config(args)
    cands = sorted(coi_candidates(m, ledger)) if args.coi else None
    if args.mode == "step":
        res = check_step(m, ledger, cfg, cands)
    elif args.mode == "base":
        res = check_base(m, ledger, args.warmup, cfg)
    elif args.mode == "unrolled-io":
        res = check_unrolled_io(m, ledger, args.k, cfg)
    elif args.mode == "unrolled":
        res = check_unrolled(m, ledger, args.k, cfg)
    elif args.mode == "per-signal":
        if not args.signal:
            raise CliError("--mode per-signal requires --signal")
        res = check_signal(m, ledger, args.signal, cfg, cands)
    else:
        raise CliError("unknown mode %r" % args.mode)
    out = {
        "design": n.name,
        "obligation": res.obligation.to_json(),
        "status": res.status,
        "reason": res.reason,
        "stats": res.stats,
    }
    if res.cex is not None:
        out["diffs"] = [d.to_json() for d in res.cex.diffs]
        if args.cex_out:
            with open(args.cex_out, "w") as f:
                f.write(res.cex.dumps())
            out["cex_path"] = args.cex_out
    print(json.dumps(out, indent=2))
    if res.status == "violated":
        return EXIT_VIOLATION
    if res.status == "unknown":
        return EXIT_UNKNOWN
    return EXIT_OK


def cmd_run(args):
    rules = _load_rules(args.rules)
    n = _load_design(args.file, rules)
    options = RunOptions(
        mode=args.mode,
        k=args.k,
        base_warmup=args.warmup,
        workers=args.workers,
        use_coi=args.coi,
        per_signal=args.per_signal,
        strict_alg1=args.strict_alg1,
        max_iterations=args.max_iterations,
    )
    provider = None
    if args.interactive:
        from .interactive import StdioChannel
        from .driver import InteractiveProvider

        provider = InteractiveProvider(StdioChannel())
    elif rules is None:
        raise CliError("run requires --rules or --interactive")
    session = run_campaign(
        n,
        rules,
        provider=provider,
        cfg=_engine_config(args),
        options=options,
        seed=args.seed,
        netlist_path=args.file,
    )
    out_path = args.out or (os.path.splitext(args.file)[0] + ".session.json")
    save_session(session, out_path)
    result = {
        "design": n.name,
        "verdict": session.verdict,
        "iterations": session.iterations,
        "session": out_path,
        "obligations_digest": session.obligations_digest(),
    }
    if session.verdict["kind"] == "violation":
        cid = session.verdict.get("cex_id")
        if cid:
            cex_path = os.path.splitext(out_path)[0] + ".%s.json" % cid
            with open(cex_path, "w") as f:
                f.write(session.cexs[cid].dumps())
            result["cex_path"] = cex_path
    print(json.dumps(result, indent=2))
    return {
        "do": EXIT_OK,
        "do-phi": EXIT_OK,
        "violation": EXIT_VIOLATION,
    }.get(session.verdict["kind"], EXIT_UNKNOWN)


def cmd_oracle(args):
    rules = _load_rules(args.rules)
    n = _load_design(args.file, rules)
    ledger = PartitionLedger(n)
    if rules is not None:
        apply_presets(ledger, rules)
    if args.random:
        rep = oracle_random(
            n, ledger, trials=args.trials, horizon=args.horizon, seed=args.seed
        )
        print(
            json.dumps(
                {
                    "mode": "random",
                    "trials": rep.trials,
                    "horizon": rep.horizon,
                    "seed": rep.seed,
                    "divergences": rep.divergences,
                    "excluded_trials": rep.excluded_trials,
                    "first_divergence": rep.first_divergence,
                },
                indent=2,
            )
        )
        return EXIT_OK if rep.clean else EXIT_VIOLATION
    v = oracle_exhaustive(n, args.cycles, phi=ledger.phi, budget=args.budget)
    out = {"mode": "exhaustive", "status": v.status, "simulations": v.simulations}
    if v.witness:
        w = v.witness
        out["witness"] = {
            "control_inputs": w.control_inputs,
            "data_a": w.data_a,
            "data_b": w.data_b,
            "diff_cycle": w.diff_cycle,
            "diff_output": w.diff_output,
            "values": [w.values_a, w.values_b],
        }
    print(json.dumps(out, indent=2))
    return EXIT_OK if v.status == "do" else EXIT_VIOLATION


def cmd_report(args):
    session = load_session(args.session)
    print(render_report(session, args.format))
    return EXIT_OK


def cmd_serve(args):
    from .server import serve

    rules = _load_rules(args.rules)
    if args.file.endswith(".session.json") or args.file.endswith(".json"):
        session = load_session(args.file)
        session_path = args.file
    else:
        n = _load_design(args.file, rules)
        session = Session(n, netlist_path=args.file)
        if rules is not None:
            apply_presets(session.ledger, rules)
            session.opclasses = [[nm, str(e)] for nm, e in rules.opclasses]
        session_path = args.out or (os.path.splitext(args.file)[0] + ".session.json")
    serve(session, port=args.port, session_path=session_path, ui_dir=args.ui_dir)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="ditkit", description="Data-independent-timing verification toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", help="parse and validate a design")
    sp.add_argument("file")
    sp.add_argument("--roles", help="role sidecar (for AIGER imports)")
    sp.set_defaults(fn=cmd_parse)

    sp = sub.add_parser("simulate", help="run the reference simulator")
    sp.add_argument("file")
    sp.add_argument("--stimuli", required=True)
    sp.add_argument("--roles")
    sp.add_argument("--uninit", type=int, default=None, help="default value for uninitialized registers")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("prove", help="run a single proof obligation")
    sp.add_argument("file")
    sp.add_argument("--mode", default="step",
                    choices=["step", "base", "unrolled-io", "unrolled", "per-signal"])
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--warmup", type=int, default=0)
    sp.add_argument("--signal")
    sp.add_argument("--rules")
    sp.add_argument("--roles")
    sp.add_argument("--coi", action="store_true")
    sp.add_argument("--cex-out")
    sp.add_argument("--solver-cmd", help="external DIMACS solver command")
    sp.add_argument("--max-conflicts", type=int)
    sp.set_defaults(fn=cmd_prove)

    sp = sub.add_parser("run", help="run the full refinement campaign")
    sp.add_argument("file")
    sp.add_argument("--rules")
    sp.add_argument("--interactive", action="store_true")
    sp.add_argument("--mode", default="inductive", choices=["inductive", "unrolled", "bughunt"])
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--warmup", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--per-signal", action="store_true")
    sp.add_argument("--coi", action="store_true")
    sp.add_argument("--strict-alg1", action="store_true")
    sp.add_argument("--max-iterations", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--solver-cmd")
    sp.add_argument("--max-conflicts", type=int)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("oracle", help="ground-truth oracles")
    sp.add_argument("file")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--exhaustive", action="store_true")
    group.add_argument("--random", action="store_true")
    sp.add_argument("--cycles", type=int, default=8)
    sp.add_argument("--budget", type=int, default=1 << 24)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--horizon", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rules")
    sp.set_defaults(fn=cmd_oracle)

    sp = sub.add_parser("report", help="render a session report")
    sp.add_argument("session")
    sp.add_argument("--format", default="md", choices=["md", "json"])
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("serve", help="serve the interactive session API")
    sp.add_argument("file", help="netlist or session file")
    sp.add_argument("--port", type=int, default=8321)
    sp.add_argument("--rules")
    sp.add_argument("--out")
    sp.add_argument("--ui-dir")
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return args.fn(args)
    except (ParseError, AigerError, SimulationError, LedgerError, OracleError,
            SessionError, CliError, OSError, ValueError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
