import os

import pytest

from ditkit.driver import (
    CallableProvider,
    Decision,
    ProviderError,
    RunOptions,
    replay_provider,
    run_campaign,
    run_upec_dit,
    schedule_parallel,
    scripted_provider,
)
from ditkit.engine import CANDIDATE, HOLD, VIOLATED, EngineConfig
from ditkit.fixtures import fixture_rules, load_fixture
from ditkit.fmt import parse_expr_text
from ditkit.miter import DATA, PartitionLedger
from ditkit.session import Session, load_session, netlist_hash, save_session
from ditkit.sidecar import parse_rules


def campaign(fixture, rules_name=None, **kw):
    n = load_fixture(fixture)
    rules = parse_rules(fixture_rules(rules_name or fixture))
    return run_campaign(n, rules, **kw)


# -- verdicts -------------------------------------------------------------------


def test_ct_alu_reaches_do():
    s = campaign("fx_ct_alu")
    assert s.verdict["kind"] == "do"
    assert set(s.ledger.z_c()) == {"valid_pipe"}
    assert s.ledger.z_d() == ["a_r", "b_r", "result_r"]
    # the loop converged in a handful of iterations and logged each proof
    assert 2 <= s.iterations <= 5
    kinds = [o["obligation"]["kind"] for o in s.obligations]
    assert kinds[-1] == "base" and kinds[-2] == "step"


def test_violating_fixtures_end_in_violation():
    for name in ("fx_mul_zeroskip", "fx_serial_shift", "fx_div_early"):
        s = campaign(name)
        assert s.verdict["kind"] == "violation", name
        cex = s.cexs[s.verdict["cex_id"]]
        assert cex.diffs, name


def test_tiny_cpu_do_phi_with_reset():
    s = campaign("fx_tiny_cpu")
    assert s.verdict["kind"] == "do-phi"
    ex = s.verdict["exclusions"]
    assert [nm for nm, _ in ex["constraints"]] == ["no_br_div"]
    assert set(ex["accepted_box_flows"]) == {"mulbox.in_a", "mulbox.in_b"}
    assert any(h["event"] == "reset-zc" for h in s.ledger.history)


def test_tiny_cpu_without_phi_violates():
    s = campaign("fx_tiny_cpu", "fx_tiny_cpu_noexcl")
    assert s.verdict["kind"] == "violation"


def test_div_crosseq_do_phi():
    s = campaign("fx_div_early", "fx_div_early_crosseq")
    assert s.verdict["kind"] == "do-phi"
    assert s.verdict["exclusions"]["cross_equalities"] == [["den", "den"]]


def test_verdict_do_requires_no_exclusions():
    s = campaign("fx_bb_leak")  # opaque box with accepted flow
    assert s.verdict["kind"] == "do-phi"
    assert s.verdict["exclusions"]["accepted_box_flows"] == ["zchk.in_v"]


def test_uninit_ctrl_base_violation():
    s = campaign("fx_uninit_ctrl")
    assert s.verdict["kind"] == "violation"
    cex = s.cexs[s.verdict["cex_id"]]
    assert cex.obligation.kind == "base"
    assert all(d.cycle == 0 for d in cex.diffs)


# -- conservativeness --------------------------------------------------------------


def adversarial_provider():
    """Answers data for every register and box input; outputs confirm."""

    def fn(query):
        if query.kind == "output":
            return Decision("control")
        return Decision("data")

    return CallableProvider(fn)


def test_adversarial_all_data_still_violates():
    for name in ("fx_mul_zeroskip", "fx_serial_shift", "fx_div_early"):
        n = load_fixture(name)
        s = run_campaign(n, provider=adversarial_provider())
        assert s.verdict["kind"] == "violation", name


def test_ledger_reset_after_invalid():
    """After an invalid-counterexample decision the classification is
    back to all-control on the next iteration."""
    n = load_fixture("fx_tiny_cpu_inline")
    events = []
    phi = parse_expr_text(
        "(not (and iv (or (eq opc (const 3 5)) (eq opc (const 3 6)))))"
    )
    inv = parse_expr_text("(and (not (eq st (const 2 2))) (not (eq st (const 2 3))))")
    state = {"added": False}

    def fn(query):
        events.append(query.location)
        if query.kind == "output":
            if not state["added"]:
                state["added"] = True
                return Decision("invalid", constraints=[("no_br_div", phi)], invariants=[("st_legal", inv)])
            return Decision("control")
        return Decision("data")

    s = run_campaign(n, provider=CallableProvider(fn))
    assert s.verdict["kind"] == "do-phi"
    resets = [i for i, h in enumerate(s.ledger.history) if h["event"] == "reset-zc"]
    assert resets
    # every register is control immediately after the reset event
    idx = resets[0]
    after = [h for h in s.ledger.history[idx + 1 :] if h["event"] == "classify"]
    assert all(h["provenance"] != "default" for h in after)


def test_invalid_decision_requires_entry():
    with pytest.raises(ProviderError):
        Decision("invalid")


def test_scripted_provider_no_match_errors():
    n = load_fixture("fx_ct_alu")
    rules = parse_rules("on nothing_matches data\non-output * violation\n")
    s = run_campaign(n, rules)
    assert s.verdict["kind"] == "unknown"
    assert "provider" in s.verdict["reason"]


def test_strict_alg1_returns_without_provider():
    n = load_fixture("fx_mul_zeroskip")
    rules = parse_rules(fixture_rules("fx_mul_zeroskip"))
    s = run_campaign(n, rules, options=RunOptions(strict_alg1=True))
    assert s.verdict["kind"] == "violation"
    assert any(d["decision"].get("kind") == "violation-strict" for d in s.decisions)


# -- parallel scheduling --------------------------------------------------------------


def test_schedule_parallel_workers_equivalent():
    n = load_fixture("fx_rounds8")
    led = PartitionLedger(n)
    r1 = schedule_parallel(n, led, workers=1)
    r4 = schedule_parallel(n, led, workers=4)
    assert set(r1) == set(r4)
    for z in r1:
        assert r1[z].status == r4[z].status, z
        d1 = [(d.loc, d.cycle, d.kind) for d in (r1[z].cex.diffs if r1[z].cex else [])]
        d4 = [(d.loc, d.cycle, d.kind) for d in (r4[z].cex.diffs if r4[z].cex else [])]
        assert d1 == d4, z


def test_schedule_parallel_empty_candidates():
    n = load_fixture("fx_pass")
    led = PartitionLedger(n)
    assert schedule_parallel(n, led, workers=1) == {}


def test_per_signal_campaign_same_verdicts():
    for name, want in (
        ("fx_ct_alu", "do"),
        ("fx_mul_zeroskip", "violation"),
        ("fx_rounds8", "do"),
    ):
        s = campaign(name, options=RunOptions(per_signal=True, workers=1))
        assert s.verdict["kind"] == want, name


def test_aggregate_violated_regardless_of_workers():
    n = load_fixture("fx_mul_zeroskip")
    rules = parse_rules(fixture_rules("fx_mul_zeroskip"))
    s1 = run_campaign(n, rules, options=RunOptions(per_signal=True, workers=1))
    s4 = run_campaign(n, rules, options=RunOptions(per_signal=True, workers=4))
    assert s1.verdict["kind"] == s4.verdict["kind"] == "violation"
    assert s1.obligations_digest() == s4.obligations_digest()


# -- modes ------------------------------------------------------------------------


def test_unrolled_mode_campaign():
    s = campaign("fx_mul_zeroskip", options=RunOptions(mode="unrolled", k=6))
    assert s.verdict["kind"] == "violation"
    s = campaign("fx_ct_alu", options=RunOptions(mode="unrolled", k=4))
    assert s.verdict["kind"] == "do"


def test_bughunt_mode():
    n = load_fixture("fx_mul_zeroskip")
    rules = parse_rules(
        "class busy control\nclass cnt control\nclass fin control\nclass done_r control\n"
        "class zskip data\nclass acc data\nclass mcand data\nclass mplier data\n"
        "on-output * violation\n"
    )
    s = run_campaign(n, rules, options=RunOptions(mode="bughunt", k=6))
    assert s.verdict["kind"] == "violation"
    # a bounded hold is NOT a proof: verdict stays unknown
    n = load_fixture("fx_ct_alu")
    rules = parse_rules(
        "class valid_pipe control\nclass a_r data\nclass b_r data\nclass result_r data\n"
        "on-output * violation\n"
    )
    s = run_campaign(n, rules, options=RunOptions(mode="bughunt", k=4))
    assert s.verdict["kind"] == "unknown"
    assert "no violation found" in s.verdict["reason"]


def test_coi_optimization_neutral():
    for name, want in (
        ("fx_ct_alu", "do"),
        ("fx_rounds8", "do"),
        ("fx_mul_zeroskip", "violation"),
        ("fx_serial_shift", "violation"),
    ):
        s = campaign(name, options=RunOptions(use_coi=True))
        assert s.verdict["kind"] == want, name


# -- sessions ------------------------------------------------------------------------


def test_session_roundtrip(tmp_path):
    s = campaign("fx_tiny_cpu")
    path = os.path.join(tmp_path, "s.json")
    save_session(s, path)
    again = load_session(path)
    assert again.verdict == s.verdict
    assert again.obligations_digest() == s.obligations_digest()
    assert again.ledger.to_json() == s.ledger.to_json()
    assert set(again.cexs) == set(s.cexs)


def test_session_hash_mismatch(tmp_path):
    s = campaign("fx_ct_alu")
    path = os.path.join(tmp_path, "s.json")
    save_session(s, path)
    other = load_fixture("fx_pass")
    with pytest.raises(Exception) as ei:
        load_session(path, other)
    assert "hash" in str(ei.value)


def test_replay_decisions_log_reproduces_digest():
    s1 = campaign("fx_mul_zeroskip")
    n = load_fixture("fx_mul_zeroskip")
    s2 = run_campaign(n, provider=replay_provider(s1.decisions))
    assert s1.obligations_digest() == s2.obligations_digest()
    assert s1.verdict["kind"] == s2.verdict["kind"]


def test_replay_after_save_load(tmp_path):
    s1 = campaign("fx_tiny_cpu")
    path = os.path.join(tmp_path, "s.json")
    save_session(s1, path)
    loaded = load_session(path)
    n = load_fixture("fx_tiny_cpu")
    s2 = run_campaign(n, provider=replay_provider(loaded.decisions))
    assert s2.obligations_digest() == s1.obligations_digest()


def test_campaign_determinism():
    a = campaign("fx_tiny_cpu")
    b = campaign("fx_tiny_cpu")
    assert a.obligations_digest() == b.obligations_digest()
    assert a.verdict == b.verdict


def test_iteration_cap():
    n = load_fixture("fx_mul_zeroskip")

    def stubborn(query):
        # classify data forever; never terminate early
        if query.kind == "output":
            return Decision("control")
        return Decision("data")

    s = run_campaign(
        n, provider=CallableProvider(stubborn), options=RunOptions(max_iterations=1)
    )
    assert s.verdict["kind"] in ("violation", "unknown")


def test_every_violation_references_replay_valid_cex():
    from ditkit.engine import replay_cex

    for name in ("fx_mul_zeroskip", "fx_serial_shift", "fx_div_early"):
        s = campaign(name)
        cex = s.cexs[s.verdict["cex_id"]]
        assert replay_cex(load_fixture(name), cex)
