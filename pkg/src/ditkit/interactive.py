"""Terminal decision channel for `run --interactive`.

Each query prints the diverging location and blocks on stdin:

    d            classify as data
    c            classify as control (confirms a violation)
    i            invalid counterexample; prompts for constraint /
                 invariant / crosseq lines, blank line ends the list
    a            abort the campaign
"""

from __future__ import annotations

import sys


class StdioChannel:
    def __init__(self, infile=None, outfile=None):
        self.infile = infile or sys.stdin
        self.outfile = outfile or sys.stderr

    def _say(self, msg):
        print(msg, file=self.outfile, flush=True)

    def _read(self, prompt):
        self._say(prompt)
        line = self.infile.readline()
        if not line:
            return None
        return line.strip()

    def ask(self, query: dict):
        self._say(
            "[%s] %s diff at %r, cycle %d (suggested: %s)"
            % (query["cex_id"], query["kind"], query["location"], query["cycle"], query["suggested"])
        )
        while True:
            ans = self._read("decision [d]ata / [c]ontrol / [i]nvalid / [a]bort:")
            if ans is None or ans == "a":
                return None
            if ans == "d":
                return {"kind": "data"}
            if ans == "c":
                return {"kind": "control"}
            if ans == "i":
                return self._ask_invalid()
            self._say("unrecognized answer %r" % ans)

    def _ask_invalid(self):
        constraints, invariants, crosseqs = [], [], []
        self._say(
            "enter 'constraint <name> = <expr>', 'invariant <name> = <expr>' or "
            "'crosseq <a> <b>' lines; empty line finishes"
        )
        while True:
            line = self._read(">")
            if not line:
                break
            toks = line.split(None, 1)
            if toks[0] == "crosseq":
                parts = toks[1].split()
                crosseqs.append((parts[0], parts[1]))
            elif toks[0] in ("constraint", "invariant") and "=" in toks[1]:
                name, expr = toks[1].split("=", 1)
                entry = [name.strip(), expr.strip()]
                (constraints if toks[0] == "constraint" else invariants).append(entry)
            else:
                self._say("unrecognized line %r" % line)
        return {
            "kind": "invalid",
            "constraints": constraints,
            "invariants": invariants,
            "crosseqs": crosseqs,
        }
