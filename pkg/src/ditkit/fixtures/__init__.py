"""Shipped example designs exercising the known leak patterns
(zero-skip multiply, serial shift, early-exit divide, branch flush) and
their data-oblivious counterparts, plus the canonical decision-rules
file for each campaign."""

from __future__ import annotations

import importlib.resources as resources

from ..fmt import parse_netlist

FIXTURES = [
    "fx_pass",
    "fx_ct_alu",
    "fx_mul_zeroskip",
    "fx_serial_shift",
    "fx_div_early",
    "fx_sha_like",
    "fx_rounds8",
    "fx_tiny_cpu",
    "fx_tiny_cpu_inline",
    "fx_bb_leak",
    "fx_bb_leak_inline",
    "fx_uninit_ctrl",
]


def fixture_text(name: str, suffix: str = ".nl") -> str:
    ref = resources.files(__package__).joinpath(name + suffix)
    return ref.read_text()


def load_fixture(name: str):
    return parse_netlist(fixture_text(name))


def fixture_rules(name: str) -> str:
    return fixture_text(name, suffix=".rules")
