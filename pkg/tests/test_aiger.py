import itertools

import pytest

from ditkit.aiger import AigerError, import_aiger
from ditkit.netlist import DATA
from ditkit.sim import simulate
from ditkit.sidecar import apply_roles, parse_rules
from helpers import aiger_eval

PASSTHROUGH = """aag 1 1 0 1 0
2
2
"""

SELF_LOOP_LATCH = """aag 1 0 1 1 0
2 2
2
"""

AND_CHAIN = """aag 5 3 0 1 2
2
4
6
10
8 2 4
10 8 6
i0 x
i1 y
i2 z
o0 out
"""

TOGGLER = """aag 3 1 1 1 1
2
4 6 0
4
6 4 2
"""


def test_passthrough():
    n = import_aiger(PASSTHROUGH)
    assert len(n.inputs) == 1 and len(n.outputs) == 1 and not n.regs
    tr = simulate(n, inputs=[{"in0": 1}, {"in0": 0}])
    assert tr.values["out0"] == [1, 0]


def test_self_loop_latch():
    n = import_aiger(SELF_LOOP_LATCH)
    assert len(n.regs) == 1
    assert n.regs[0].init == 0
    tr = simulate(n, inputs=[{}, {}])
    assert tr.values["out0"] == [0, 0]


def test_latch_reset_values():
    n = import_aiger("aag 1 0 1 1 0\n2 2 1\n2\n")
    assert n.regs[0].init == 1
    n = import_aiger("aag 1 0 1 1 0\n2 2 2\n2\n")
    assert n.regs[0].init is None  # self-reset = uninitialized


def test_symbol_table_names():
    n = import_aiger(AND_CHAIN)
    assert [p.name for p in n.inputs] == ["x", "y", "z"]
    assert [p.name for p in n.outputs] == ["out"]
    assert all(p.role == DATA for p in n.inputs + n.outputs)


def test_and_chain_all_inputs():
    n = import_aiger(AND_CHAIN)
    for x, y, z in itertools.product((0, 1), repeat=3):
        tr = simulate(n, inputs=[{"x": x, "y": y, "z": z}])
        ref = aiger_eval(AND_CHAIN, [[x, y, z]])
        assert tr.values["out"][0] == ref[0][0] == (x & y & z)


def test_sequential_fidelity_exhaustive():
    """Imported netlist matches the independent AIGER evaluator on all
    input sequences of length <= 4."""
    for text in (TOGGLER, AND_CHAIN, PASSTHROUGH):
        n = import_aiger(text)
        names = [p.name for p in n.inputs]
        ni = len(names)
        for length in range(1, 5):
            for seq in itertools.product(range(1 << ni), repeat=length):
                rows = [
                    {names[i]: (v >> i) & 1 for i in range(ni)} for v in seq
                ]
                bit_rows = [[(v >> i) & 1 for i in range(ni)] for v in seq]
                tr = simulate(n, inputs=rows)
                ref = aiger_eval(text, bit_rows)
                got = [
                    [tr.values[p.name][t] for p in n.outputs] for t in range(length)
                ]
                assert got == ref, (text.splitlines()[0], seq)


def test_binary_rejected():
    with pytest.raises(AigerError):
        import_aiger(b"aig 1 1 0 1 0\n")


def test_malformed_header():
    with pytest.raises(AigerError):
        import_aiger("agg 1 1 0 1 0\n")
    with pytest.raises(AigerError):
        import_aiger("aag 1 1\n")


def test_role_sidecar_override():
    n = import_aiger(AND_CHAIN)
    rules = parse_rules("role x control\nrole out control\n")
    n2 = apply_roles(n, rules)
    roles = {p.name: p.role for p in n2.inputs + n2.outputs}
    assert roles == {"x": "control", "y": "data", "z": "data", "out": "control"}
