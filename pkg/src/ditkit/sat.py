"""SAT solving: an embedded CDCL solver and a DIMACS process interface.

The embedded solver is a conventional conflict-driven solver (two
watched literals, first-UIP learning, VSIDS-style activities with a
lazy heap, phase saving, Luby restarts) that is fully deterministic:
ties break on variable index and nothing is randomized. It exists so
the toolkit runs with zero external dependencies; any solver speaking
DIMACS on stdin and SAT-competition output on stdout can be substituted
via ExternalSolver.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass, field
from heapq import heappop, heappush

SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"


@dataclass
class SatResult:
    status: str
    model: dict[int, bool] | None = None
    conflicts: int = 0
    decisions: int = 0

    def value(self, var: int) -> bool:
        return self.model.get(var, False)


def _luby(i):
    # Luby sequence: 1 1 2 1 1 2 4 ...
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while (1 << k) - 1 != i:
        k -= 1
        i -= (1 << k) - 1
    return 1 << (k - 1) if k else 1


class CdclSolver:
    def __init__(self, nvars: int, clauses, max_conflicts: int | None = None):
        self.nvars = nvars
        self.max_conflicts = max_conflicts
        self.assign = [0] * (nvars + 1)  # 0 unassigned, 1 true, -1 false
        self.level = [0] * (nvars + 1)
        self.reason = [None] * (nvars + 1)
        self.saved = [False] * (nvars + 1)
        self.activity = [0.0] * (nvars + 1)
        self.var_inc = 1.0
        self.heap = []
        for v in range(nvars, 0, -1):
            heappush(self.heap, (0.0, v))
        self.watch = {}
        self.clauses = []
        self.n_given = 0
        self.trail = []
        self.qhead = 0
        self.ok = True
        self.conflicts = 0
        self.decisions = 0
        self._level_marks = []
        for c in clauses:
            if not self._add_clause(c):
                self.ok = False
                break
        self.n_given = len(self.clauses)

    # -- clause bookkeeping -------------------------------------------------

    def _watch_clause(self, ci):
        c = self.clauses[ci]
        for lit in c[:2]:
            self.watch.setdefault(-lit, []).append(ci)

    def _add_clause(self, lits):
        seen = {}
        out = []
        for lit in lits:
            v = abs(lit)
            if not 1 <= v <= self.nvars:
                raise ValueError("literal %d out of range" % lit)
            if -lit in seen:
                return True  # tautology
            if lit not in seen:
                seen[lit] = True
                out.append(lit)
        if not out:
            return False
        if len(out) == 1:
            return self._enqueue(out[0], None)
        self.clauses.append(out)
        self._watch_clause(len(self.clauses) - 1)
        return True

    def _lit_value(self, lit):
        a = self.assign[abs(lit)]
        return a if lit > 0 else -a

    def _enqueue(self, lit, reason):
        val = self._lit_value(lit)
        if val == 1:
            return True
        if val == -1:
            return False
        v = abs(lit)
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = self.current_level
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    # -- search ---------------------------------------------------------------

    @property
    def current_level(self):
        return len(self._level_marks)

    def solve(self) -> SatResult:
        if not self.ok:
            return SatResult(UNSAT)
        confl = self._propagate()
        if confl is not None:
            return SatResult(UNSAT)
        restart_n = 1
        budget = _luby(restart_n) * 100
        since_restart = 0
        while True:
            lit = self._pick_branch()
            if lit is None:
                model = {v: self.assign[v] == 1 for v in range(1, self.nvars + 1)}
                return SatResult(SAT, model, self.conflicts, self.decisions)
            self.decisions += 1
            self._level_marks.append(len(self.trail))
            self._enqueue(lit, None)
            while True:
                confl = self._propagate()
                if confl is None:
                    break
                self.conflicts += 1
                since_restart += 1
                if self.max_conflicts is not None and self.conflicts > self.max_conflicts:
                    return SatResult(UNKNOWN, None, self.conflicts, self.decisions)
                if self.current_level == 0:
                    return SatResult(UNSAT, None, self.conflicts, self.decisions)
                learned, bj_level = self._analyze(confl)
                self._backjump(bj_level)
                if len(learned) == 1:
                    self._enqueue(learned[0], None)
                else:
                    self.clauses.append(learned)
                    self._watch_clause(len(self.clauses) - 1)
                    self._enqueue(learned[0], len(self.clauses) - 1)
                self.var_inc *= 1.0 / 0.95
                if self.var_inc > 1e100:
                    for v in range(1, self.nvars + 1):
                        self.activity[v] *= 1e-100
                    self.var_inc *= 1e-100
            if since_restart >= budget:
                since_restart = 0
                restart_n += 1
                budget = _luby(restart_n) * 100
                self._backjump(0)

    def _pick_branch(self):
        while self.heap:
            act, v = self.heap[0]
            if self.assign[v] == 0 and -act == self.activity[v]:
                lit = v if self.saved[v] else -v
                return lit
            heappop(self.heap)
        for v in range(1, self.nvars + 1):
            if self.assign[v] == 0:
                return v if self.saved[v] else -v
        return None

    def _bump(self, v):
        self.activity[v] += self.var_inc
        heappush(self.heap, (-self.activity[v], v))

    def _propagate(self):
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            watchers = self.watch.get(lit)
            if not watchers:
                continue
            i = 0
            while i < len(watchers):
                ci = watchers[i]
                c = self.clauses[ci]
                # normalize: watched false literal at position 1
                if c[0] == -lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                if self._lit_value(first) == 1:
                    i += 1
                    continue
                moved = False
                for k in range(2, len(c)):
                    if self._lit_value(c[k]) != -1:
                        c[1], c[k] = c[k], c[1]
                        self.watch.setdefault(-c[1], []).append(ci)
                        watchers[i] = watchers[-1]
                        watchers.pop()
                        moved = True
                        break
                if moved:
                    continue
                # unit or conflict
                if not self._enqueue(first, ci):
                    return ci
                i += 1
        return None

    def _analyze(self, confl_ci):
        """First-UIP conflict analysis; returns (learned, backjump level)
        with the asserting literal at learned[0]."""
        learned = []
        seen = [False] * (self.nvars + 1)
        counter = 0
        lit = None  # literal currently being resolved on (true on trail)
        ci = confl_ci
        idx = len(self.trail) - 1
        while True:
            for l in self.clauses[ci]:
                if lit is not None and l == lit:
                    continue  # skip the literal this clause asserted
                v = abs(l)
                if seen[v] or self.level[v] == 0:
                    continue
                seen[v] = True
                self._bump(v)
                if self.level[v] >= self.current_level:
                    counter += 1
                else:
                    learned.append(l)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            lit = self.trail[idx]
            v = abs(lit)
            seen[v] = False
            counter -= 1
            idx -= 1
            if counter == 0:
                break
            ci = self.reason[v]
        learned.insert(0, -lit)
        # backjump level = second-highest level in learned clause
        if len(learned) == 1:
            bj = 0
        else:
            levels = sorted((self.level[abs(l)] for l in learned[1:]), reverse=True)
            bj = levels[0]
            # move a literal of bj level to position 1 for watching
            for k in range(1, len(learned)):
                if self.level[abs(learned[k])] == bj:
                    learned[1], learned[k] = learned[k], learned[1]
                    break
        return learned, bj

    def _backjump(self, level):
        if self.current_level <= level:
            return
        mark = self._level_marks[level]
        for lit in reversed(self.trail[mark:]):
            v = abs(lit)
            self.saved[v] = self.assign[v] == 1
            self.assign[v] = 0
            self.reason[v] = None
            heappush(self.heap, (-self.activity[v], v))
        del self.trail[mark:]
        del self._level_marks[level:]
        self.qhead = min(self.qhead, len(self.trail))


def solve(nvars: int, clauses, max_conflicts: int | None = None) -> SatResult:
    """One-shot solve with the embedded solver."""
    return CdclSolver(nvars, clauses, max_conflicts).solve()


def brute_force(nvars: int, clauses) -> SatResult:
    """Exhaustive enumeration. Test oracle only; independent of CDCL."""
    for m in range(1 << nvars):
        ok = True
        for c in clauses:
            if not any(
                ((m >> (abs(l) - 1)) & 1) == (1 if l > 0 else 0) for l in c
            ):
                ok = False
                break
        if ok:
            return SatResult(SAT, {v: bool((m >> (v - 1)) & 1) for v in range(1, nvars + 1)})
    return SatResult(UNSAT)


def check_model(clauses, model: dict[int, bool]) -> bool:
    return all(any(model.get(abs(l), False) == (l > 0) for l in c) for c in clauses)


# -- DIMACS interface ---------------------------------------------------------


def to_dimacs(nvars: int, clauses) -> str:
    lines = ["p cnf %d %d" % (nvars, len(clauses))]
    for c in clauses:
        lines.append(" ".join(str(l) for l in c) + " 0")
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str):
    nvars = nclauses = None
    clauses = []
    cur = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError("bad DIMACS header %r" % line)
            nvars, nclauses = int(parts[2]), int(parts[3])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(lit)
    if cur:
        clauses.append(cur)
    if nvars is None:
        raise ValueError("missing DIMACS header")
    return nvars, clauses


def parse_solver_output(text: str) -> SatResult:
    """Parse SAT-competition style output: an 's' status line and 'v'
    value lines terminated by 0."""
    status = None
    model = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("s "):
            word = line[2:].strip().upper()
            if word == "SATISFIABLE":
                status = SAT
            elif word == "UNSATISFIABLE":
                status = UNSAT
            else:
                status = UNKNOWN
        elif line.startswith("v "):
            for tok in line[2:].split():
                lit = int(tok)
                if lit != 0:
                    model[abs(lit)] = lit > 0
    if status is None:
        raise ValueError("no status line in solver output")
    return SatResult(status, model if status == SAT else None)


class ExternalSolver:
    """Run an external DIMACS solver process per query."""

    def __init__(self, command: list[str], timeout: float | None = None):
        self.command = list(command)
        self.timeout = timeout

    def solve(self, nvars: int, clauses, max_conflicts=None) -> SatResult:
        dimacs = to_dimacs(nvars, clauses)
        try:
            proc = subprocess.run(
                self.command,
                input=dimacs.encode(),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired:
            return SatResult(UNKNOWN)
        except OSError as e:
            raise RuntimeError("external solver failed to start: %s" % e) from e
        try:
            return parse_solver_output(proc.stdout.decode())
        except ValueError as e:
            raise RuntimeError("external solver protocol error: %s" % e) from e


class EmbeddedSolver:
    """Adapter giving the embedded solver the same interface."""

    def solve(self, nvars, clauses, max_conflicts=None) -> SatResult:
        return solve(nvars, clauses, max_conflicts)


def main(argv=None):
    """DIMACS CLI (used to self-test the external-process interface)."""
    import sys

    text = sys.stdin.read()
    nvars, clauses = parse_dimacs(text)
    res = solve(nvars, clauses)
    if res.status == SAT:
        print("s SATISFIABLE")
        lits = [v if res.model[v] else -v for v in sorted(res.model)]
        for i in range(0, len(lits), 20):
            print("v " + " ".join(str(l) for l in lits[i : i + 20]))
        print("v 0")
        return 10
    if res.status == UNSAT:
        print("s UNSATISFIABLE")
        return 20
    print("s UNKNOWN")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
