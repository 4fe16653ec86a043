import pytest

from ditkit.fixtures import load_fixture
from ditkit.fmt import ParseError
from ditkit.miter import PartitionLedger
from ditkit.sidecar import apply_presets, match_decision, parse_rules


def test_full_grammar():
    text = """
; comment
role in* data
class *_r data
class valid_pipe control
on mulbox.* data
on-output rdy invalid:no_br_div
on-output * violation
constraint live = (not (eq a (const 4 0)))
invariant sane = (eq r (const 2 0))
crosseq den den
defer constraint no_br_div = (eq a (const 4 1))
box mulbox verified-do
opclass load = (eq a (const 4 2))
"""
    rules = parse_rules(text)
    assert rules.role_overrides == [("in*", "data")]
    assert len(rules.decision_rules) == 5
    assert rules.decision_rules[0].scope == "state"
    assert rules.decision_rules[3].action == "invalid"
    assert rules.decision_rules[3].activates == ("no_br_div",)
    assert [nm for nm, _ in rules.constraints] == ["live"]
    assert [nm for nm, _ in rules.invariants] == ["sane"]
    assert rules.crosseqs == [("den", "den")]
    assert "no_br_div" in rules.deferred
    assert rules.box_modes == {"mulbox": "verified-do"}
    assert [nm for nm, _ in rules.opclasses] == ["load"]


def test_first_match_wins():
    rules = parse_rules("class a_* data\nclass * control\n")
    assert match_decision(rules, "state", "a_r").action == "data"
    assert match_decision(rules, "state", "other").action == "control"
    assert match_decision(rules, "output", "other") is None


@pytest.mark.parametrize(
    "line",
    [
        "class x bogus",
        "on x",
        "on-output x data",
        "constraint broken",
        "crosseq onlyone",
        "box b nonsense",
        "defer wire x = a",
        "mystery directive",
        "on x invalid:",
    ],
)
def test_rejects_malformed(line):
    with pytest.raises(ParseError):
        parse_rules(line + "\n")


def test_apply_presets():
    n = load_fixture("fx_div_early")
    led = PartitionLedger(n)
    rules = parse_rules("crosseq den den\nclass nreg data\n")
    apply_presets(led, rules)
    assert led.cross_equalities == [("den", "den")]
    assert led.z_d() == []  # class lines are decision rules, not presets
    apply_presets(PartitionLedger(n), rules, include_class=True)
    led2 = PartitionLedger(n)
    apply_presets(led2, rules, include_class=True)
    assert led2.z_d() == ["nreg"]


def test_box_mode_preset():
    n = load_fixture("fx_bb_leak")
    led = PartitionLedger(n)
    apply_presets(led, parse_rules("box zchk verified-do\n"))
    assert led.box_modes["zchk"] == "verified-do"
