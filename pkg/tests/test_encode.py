import random

import pytest

from ditkit.encode import BudgetExceeded, WindowEncoding, decode_values
from ditkit.engine import (
    CANDIDATE,
    HOLD,
    VIOLATED,
    EngineConfig,
    check_step,
    step_diff_registers,
)
from ditkit.fixtures import load_fixture
from ditkit.miter import PartitionLedger, build_miter
from ditkit.netlist import CONTROL, DATA
from ditkit.sat import solve
from helpers import random_netlist, semantic_step_status


def _enc(name, frames=1, **kw):
    n = load_fixture(name)
    led = PartitionLedger(n)
    m = build_miter(n, led)
    return WindowEncoding(m, frames, **kw), n, led, m


def test_and_gate_is_three_clauses_plus_goal():
    enc, *_ = _enc("fx_pass")
    before = len(enc.clauses)
    a, b = enc._fresh(), enc._fresh()
    y = enc._and(a, b)
    assert len(enc.clauses) - before == 3
    cnf = enc.instance([y], {})
    assert cnf.clauses[-1] == [y]  # unit goal clause on top


def test_xor_mux_clause_counts():
    enc, *_ = _enc("fx_pass")
    a, b, c = enc._fresh(), enc._fresh(), enc._fresh()
    before = len(enc.clauses)
    enc._xor(a, b)
    assert len(enc.clauses) - before == 4
    before = len(enc.clauses)
    enc._mux(c, a, b)
    assert len(enc.clauses) - before == 4


def test_fx_pass_step_unsat():
    """No data anywhere: the step obligation has no discrepancy source."""
    n = load_fixture("fx_pass")
    led = PartitionLedger(n)
    m = build_miter(n, led)
    enc = WindowEncoding(m, 1)
    goal = []
    for frame in (0, 1):
        goal += enc.diff_indicators("y", frame)
    cnf = enc.instance(goal, {})
    assert solve(cnf.nvars, cnf.clauses).status == "unsat"


def test_shared_control_inputs_same_literal():
    enc, n, led, m = _enc("fx_ct_alu")
    for frame in (0, 1):
        assert enc.word_lits("start", "A", frame) == enc.word_lits("start", "B", frame)
        assert enc.word_lits("op", "A", frame) == enc.word_lits("op", "B", frame)
        assert enc.word_lits("a", "A", frame) != enc.word_lits("a", "B", frame)


def test_varmap_contract():
    enc, n, led, m = _enc("fx_ct_alu")
    cnf = enc.instance(None, {})
    lit = cnf.lookup("a_r", "A", 0, bit=2)
    assert isinstance(lit, int) and lit != 0
    assert cnf.lookup("start", "A", 1) == cnf.lookup("start", "B", 1)


def test_decode_values_shapes():
    enc, n, led, m = _enc("fx_mul_zeroskip", frames=2)
    cnf = enc.instance(None, {})
    res = solve(cnf.nvars, cnf.clauses)
    assert res.status == "sat"
    vals = decode_values(enc, res.model)
    for inst in ("A", "B"):
        assert set(vals[inst]) >= {p.name for p in n.inputs} | {r.name for r in n.regs}
        for sig, per in vals[inst].items():
            assert len(per) == 3


def test_clause_budget():
    n = load_fixture("fx_mul_zeroskip")
    led = PartitionLedger(n)
    m = build_miter(n, led)
    with pytest.raises(BudgetExceeded):
        WindowEncoding(m, 6, clause_budget=100)
    r = check_step(m, led, EngineConfig(clause_budget=10))
    assert r.status == "unknown"
    assert "resource-limit" in r.reason


def test_rollback_restores_state():
    enc, *_ = _enc("fx_ct_alu")
    mark = enc.snapshot()
    enc.diff_indicators("result", 1)
    assert len(enc.clauses) > mark[0]
    enc.rollback(mark)
    assert (len(enc.clauses), enc.nvars) == mark


# -- encode/solve vs semantic brute force -------------------------------------


def _random_ledger(rng, n, led):
    for r in n.regs:
        x = rng.random()
        if x < 0.4:
            led.classify(r.name, DATA, "scripted-rule")
        elif x < 0.5:
            led.classify(r.name, CONTROL, "scripted-rule")
    return led


def test_encode_matches_bruteforce_random_miters():
    """SAT/UNSAT of the encoded step obligation matches exhaustive
    semantic enumeration over all free choices (the spec's encoding
    correctness property)."""
    rng = random.Random(2024)
    checked = 0
    seed = 0
    while checked < 60:
        seed += 1
        n = random_netlist(seed, max_state_bits=6)
        if sum(p.width for p in n.inputs) > 5 or sum(r.width for r in n.regs) > 5:
            continue
        led = _random_ledger(rng, n, PartitionLedger(n))
        try:
            want_status, want_diffs = semantic_step_status(n, led, max_bits=20)
        except ValueError:
            continue
        m = build_miter(n, led)
        got = check_step(m, led)
        assert got.status == want_status, (seed, got.status, want_status)
        if want_status != VIOLATED:
            got_diffs = step_diff_registers(m, led)
            assert got_diffs == want_diffs, (seed, got_diffs, want_diffs)
        checked += 1
    assert checked == 60
