import pytest

from ditkit.expr import (
    WidthError,
    const,
    eadd,
    eand,
    econcat,
    eeq,
    emux,
    eshl,
    eslice,
    eult,
    eval_expr,
    expr_width,
    pretty_expr,
    ref,
)


ENV = {"a": 8, "b": 8, "c": 1, "n": 4}


def test_width_rules():
    assert expr_width(eadd(ref("a"), ref("b")), ENV) == 8
    assert expr_width(eeq(ref("a"), ref("b")), ENV) == 1
    assert expr_width(eult(ref("a"), ref("b")), ENV) == 1
    assert expr_width(econcat(ref("a"), ref("n")), ENV) == 12
    assert expr_width(eslice(ref("a"), 5, 2), ENV) == 4
    assert expr_width(emux(ref("c"), ref("a"), ref("b")), ENV) == 8


def test_width_mismatch_named():
    with pytest.raises(WidthError):
        expr_width(eadd(ref("a"), ref("n")), ENV)
    # mux over mismatched branches names the mux node
    bad = emux(ref("c"), const(4, 0), ref("a"))
    with pytest.raises(WidthError) as ei:
        expr_width(bad, ENV)
    assert "mux" in str(ei.value)
    assert ei.value.node is bad


def test_width_errors():
    with pytest.raises(WidthError):
        expr_width(emux(ref("a"), ref("b"), ref("b")), ENV)  # cond width 8
    with pytest.raises(WidthError):
        expr_width(eslice(ref("a"), 8, 0), ENV)  # hi out of range
    with pytest.raises(WidthError):
        expr_width(ref("zzz"), ENV)
    with pytest.raises(WidthError):
        const(4, 16)


def test_eval_modular():
    env = {"a": 4, "b": 4}
    vals = {"a": 9, "b": 12}
    assert eval_expr(eadd(ref("a"), ref("b")), env, vals) == (9 + 12) % 16
    assert eval_expr(eult(ref("a"), ref("b")), env, vals) == 1
    assert eval_expr(eshl(ref("a"), 2), env, vals) == (9 << 2) % 16
    assert eval_expr(eslice(econcat(ref("a"), ref("b")), 7, 4), env, vals) == 9


def test_pretty_round():
    e = emux(ref("c"), eadd(ref("a"), const(8, 3)), ref("b"))
    assert pretty_expr(e) == "(mux c (add a (const 8 3)) b)"
