"""Shared fixtures: the seven-state example chain, the slow-loop chain on
which plain value iteration is known to stop far from the truth, and small
builders."""

from fractions import Fraction

import pytest

from evtkit import FLOAT, RATIONAL, parse_model
from evtkit.model import MarkovChain, validate_chain

# Seven states, two cycles, two terminal classes; exact visiting times of
# the transient part are (41/25, 41/50, 3/5, 5).
SEVEN_STATE_TEXT = """\
@type dtmc
@states 7
s1 s2 s3 s4 s5 s6 s7
@initial
s1 0.4
s3 0.6
@transitions
s1 s2 0.5
s1 s4 0.5
s2 s1 1
s3 s1 0.7
s3 s4 0.3
s4 s4 0.8
s4 s5 0.1
s4 s7 0.1
s5 s5 0.4
s5 s6 0.6
s6 s5 1
s7 s7 1
"""

SEVEN_EXACT_EVTS = [Fraction(41, 25), Fraction(41, 50), Fraction(3, 5),
                    Fraction(5)]


def slow_loop_text(p: str) -> str:
    """Three states; a self-loop of probability p makes consecutive value
    iterates nearly stationary long before convergence."""
    return f"""\
@type dtmc
@states 3
s1 s2 s3
@initial
s1 1
@transitions
s1 s2 0.1
s1 s3 0.9
s2 s2 {p}
s2 s3 {1 - Fraction(p)}
s3 s3 1
"""


def build_chain(rows, init, backend=RATIONAL, names=None, rates=None,
                rewards=None):
    """Compact chain builder: rows/init given as dicts of exact values."""
    n = len(init)
    names = names or [f"s{i}" for i in range(n)]
    conv = Fraction if backend == RATIONAL else float
    return validate_chain(MarkovChain(
        names=names,
        backend=backend,
        rows=[sorted((t, conv(p)) for t, p in row.items()) for row in rows],
        init=[conv(v) for v in init],
        rates=None if rates is None else [conv(r) for r in rates],
        rewards={} if rewards is None else
                {k: [conv(v) for v in vec] for k, vec in rewards.items()},
    ))


@pytest.fixture
def seven_rational():
    return parse_model(SEVEN_STATE_TEXT, RATIONAL)


@pytest.fixture
def seven_float():
    return parse_model(SEVEN_STATE_TEXT, FLOAT)


@pytest.fixture
def slow_loop_rational():
    return parse_model(slow_loop_text("99/100"), RATIONAL)


@pytest.fixture
def slow_loop_float():
    return parse_model(slow_loop_text("0.99"), FLOAT)
