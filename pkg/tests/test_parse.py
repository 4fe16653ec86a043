import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ditkit.fixtures import FIXTURES, fixture_text, load_fixture
from ditkit.fmt import ParseError, parse_netlist, pretty_print
from ditkit.netlist import netlist_equal, validate
from helpers import random_netlist

MINIMAL = """module m
input c 1 control
output y 1 control
drive y = c
endmodule
"""


def test_minimal_module():
    n = parse_netlist(MINIMAL)
    assert n.name == "m"
    assert len(n.inputs) == 1 and len(n.outputs) == 1 and len(n.regs) == 0
    assert n.drive_fns["y"].op == "ref"


def test_fixture_roundtrip():
    for name in FIXTURES:
        n = load_fixture(name)
        again = parse_netlist(pretty_print(n))
        assert netlist_equal(n, again), name


def test_mul_zeroskip_ports():
    n = load_fixture("fx_mul_zeroskip")
    roles = {p.name: p.role for p in n.inputs + n.outputs}
    assert roles == {
        "start": "control",
        "a": "data",
        "b": "data",
        "done": "control",
        "p": "data",
    }


def test_width_mismatch_names_node():
    src = """module m
input c 1 control
input a 8 data
output y 8 data
drive y = (mux c (const 4 0) a)
endmodule
"""
    with pytest.raises(ParseError) as ei:
        parse_netlist(src)
    assert "mux" in str(ei.value)


@pytest.mark.parametrize(
    "line,msg",
    [
        ("input c 1 control\ninput c 1 control", "duplicate-name"),
        ("reg r 4 init 0", "missing-next"),
        ("wire w 1 = (and w w)", "combinational-cycle"),
        ("wire w 1 = zzz", "undeclared-signal"),
        ("output q 1 control", "missing-drive"),
    ],
)
def test_validation_errors(line, msg):
    src = "module m\ninput c 1 control\noutput y 1 control\ndrive y = c\n%s\nendmodule\n" % line
    with pytest.raises(ParseError) as ei:
        parse_netlist(src)
    assert msg in str(ei.value)


def test_syntax_errors_have_location():
    with pytest.raises(ParseError) as ei:
        parse_netlist("module m\ninput c 1 nonsense\nendmodule\n")
    assert ei.value.line == 2


def test_wire_self_cycle_diagnostic():
    # via validate() directly: diagnostics are data, not exceptions
    n = parse_netlist(MINIMAL)
    n.wires.append(("w", 1, __import__("ditkit.expr", fromlist=["ref"]).ref("w")))
    diags = validate(n)
    assert any(d.code == "combinational-cycle" for d in diags)


def test_validate_clean_fixture():
    n = load_fixture("fx_ct_alu")
    assert validate(n) == []


def test_comments_and_blank_lines():
    n = parse_netlist("; header\n\nmodule m ; trailing\ninput c 1 control\noutput y 1 control\ndrive y = c\nendmodule\n")
    assert n.name == "m"


def test_random_roundtrip_seeded():
    for seed in range(40):
        n = random_netlist(seed)
        assert validate(n) == [], seed
        again = parse_netlist(pretty_print(n))
        assert netlist_equal(n, again), seed


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_random_roundtrip_hypothesis(seed):
    n = random_netlist(seed)
    again = parse_netlist(pretty_print(n))
    assert netlist_equal(n, again)
