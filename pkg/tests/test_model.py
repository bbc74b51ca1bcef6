from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtkit import FLOAT, RATIONAL, ModelError, embed, parse_model, serialize_model
from evtkit.graph import decompose
from evtkit.model import transient_submatrix
from evtkit.oracle import generate_random_chain

from conftest import SEVEN_STATE_TEXT, build_chain


def test_parse_seven_state(seven_rational):
    c = seven_rational
    assert c.n == 7
    assert c.names == ["s1", "s2", "s3", "s4", "s5", "s6", "s7"]
    assert c.init[0] == Fraction(2, 5)
    assert c.init[2] == Fraction(3, 5)
    assert c.probability(3, 3) == Fraction(4, 5)
    assert not c.is_ctmc


def test_parse_single_absorbing_state():
    c = parse_model("@type dtmc\n@initial\na 1\n@transitions\na a 1\n", RATIONAL)
    assert c.n == 1
    assert c.init == [Fraction(1)]


def test_row_sum_violation_names_state():
    bad = SEVEN_STATE_TEXT.replace("s4 s5 0.1", "s4 s5 0.2")
    with pytest.raises(ModelError, match="s4"):
        parse_model(bad, RATIONAL)
    with pytest.raises(ModelError, match="s4"):
        parse_model(bad, FLOAT)


def test_float_renormalizes_tiny_defect():
    text = ("@type dtmc\n@initial\na 1\n@transitions\n"
            "a b 0.1\na b2 0.2\na b3 0.7\nb b 1\nb2 b2 1\nb3 b3 1\n")
    c = parse_model(text, FLOAT)
    assert sum(p for _, p in c.rows[0]) == 1.0


def test_fraction_tokens_parse_exactly():
    text = ("@type dtmc\n@initial\na 1\n@transitions\n"
            "a b 1/3\na c 2/3\nb b 1\nc c 1\n")
    c = parse_model(text, RATIONAL)
    assert c.probability(0, 1) == Fraction(1, 3)


@pytest.mark.parametrize("snippet,message", [
    ("@type dtmc\n@transitions\na b\n", "expected"),
    ("@type dtmc\n@initial\na 1\n@transitions\na a 1\na a 1\n", "duplicate transition"),
    ("@type dtmc\n@initial\na 1\n@transitions\na a 2\n", "out of"),
    ("@type dtmc\n@initial\na 1\n@transitions\na a 1\n@rates\na 2\n", "dtmc"),
    ("@type dtmc\n@initial\na 1\n@transitions\na b 0.5\na b 0.5\nb b 1\n",
     "duplicate transition"),
    ("@initial\na 1\n", "@type"),
    ("@type ctmc\n@initial\na 1\n@transitions\na a 1\n", "@rates"),
    ("@type ctmc\n@initial\na 1\n@transitions\na a 1\n@rates\na 0\n", "positive"),
], ids=["arity", "dup-self", "range", "rate-dtmc", "dup-pair", "no-type",
        "ctmc-missing-rates", "rate-zero"])
def test_parse_errors(snippet, message):
    with pytest.raises(ModelError, match=message):
        parse_model(snippet, RATIONAL)


def test_syntax_error_carries_line_number():
    text = "@type dtmc\n@initial\na 1\n@transitions\na a one\n"
    with pytest.raises(ModelError, match="line 5"):
        parse_model(text, RATIONAL)


def test_negative_probability_rejected():
    text = "@type dtmc\n@initial\na 1\n@transitions\na a -1/2\na b 3/2\nb b 1\n"
    with pytest.raises(ModelError, match="out of"):
        parse_model(text, RATIONAL)


def test_states_count_mismatch():
    text = "@type dtmc\n@states 3\n@initial\na 1\n@transitions\na a 1\n"
    with pytest.raises(ModelError, match="declares 3"):
        parse_model(text, RATIONAL)


def test_roundtrip_seven_state(seven_rational):
    again = parse_model(serialize_model(seven_rational), RATIONAL)
    assert again.names == seven_rational.names
    assert again.rows == seven_rational.rows
    assert again.init == seven_rational.init
    assert again.rewards == seven_rational.rewards


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000),
       n=st.integers(min_value=1, max_value=12))
def test_roundtrip_random_chains(seed, n):
    chain = generate_random_chain(seed, n, density=0.5,
                                  bscc_count=min(2, n), ctmc=seed % 2 == 0,
                                  reward=True)
    again = parse_model(serialize_model(chain), RATIONAL)
    assert again.rows == chain.rows
    assert again.init == chain.init
    assert again.rates == chain.rates
    assert again.rewards == chain.rewards


def test_row_sums_exact_after_parse(seven_rational):
    for row in seven_rational.rows:
        assert sum(p for _, p in row) == 1
    assert sum(seven_rational.init) == 1


def test_embed_strips_rates_only():
    ctmc = build_chain([{1: 1}, {1: 1}], [1, 0], rates=[2, 5])
    emb = embed(ctmc)
    assert not emb.is_ctmc
    assert emb.rows == ctmc.rows
    assert emb.init == ctmc.init
    with pytest.raises(ModelError, match="discrete"):
        embed(emb)


def test_transient_submatrix_seven_state(seven_rational):
    dec = decompose(seven_rational)
    q_rows, r_rows, tau = transient_submatrix(seven_rational, dec)
    assert dec.transient_states == [0, 1, 2, 3]
    # row of s4: self-loop 0.8 in Q, 0.1 each to s5 and s7 in R
    assert (3, Fraction(4, 5)) in q_rows[3]
    assert sorted(r_rows[3]) == [(4, Fraction(1, 10)), (6, Fraction(1, 10))]
    assert tau == [Fraction(2, 5), 0, Fraction(3, 5), 0]
    for q_row, r_row in zip(q_rows, r_rows):
        assert sum(p for _, p in q_row) + sum(p for _, p in r_row) == 1


def test_transient_submatrix_fully_absorbing():
    chain = build_chain([{0: 1}, {1: 1}], [1, 0])
    q_rows, r_rows, tau = transient_submatrix(chain, decompose(chain))
    assert q_rows == [] and r_rows == [] and tau == []


def test_transient_submatrix_irreducible_cycle():
    chain = build_chain([{1: 1}, {0: 1}], [1, 0])
    q_rows, _, _ = transient_submatrix(chain, decompose(chain))
    assert q_rows == []
