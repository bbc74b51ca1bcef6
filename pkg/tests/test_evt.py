from fractions import Fraction

import pytest

from evtkit import (
    FLOAT,
    INF,
    EvtkitError,
    SolverError,
    compute_evts,
    diff,
    topological_evts_absolute,
    topological_evts_relative,
)
from evtkit.evt import EvtRequest, _absolute_threshold
from evtkit.graph import decompose
from evtkit.oracle import generate_fdr, generate_random_chain, oracle_evts

from conftest import SEVEN_EXACT_EVTS, build_chain


def finite_part(values):
    return [v for v in values if v != INF]


def test_exact_seven_state(seven_rational):
    r = compute_evts(EvtRequest(chain=seven_rational, method="lu-exact",
                                epsilon=0))
    assert r.values == SEVEN_EXACT_EVTS + [INF, INF, INF]
    assert r.certified_bound == 0
    assert [float(v) for v in r.values[:4]] == [1.64, 0.82, 0.6, 5.0]


def test_fdr6_exact_values():
    chain = generate_fdr(6)
    r = compute_evts(EvtRequest(chain=chain, method="lu-exact", epsilon=0))
    by_name = dict(zip(r.names, r.values))
    assert by_name["v4c0"] == by_name["v4c1"] == by_name["v4c2"] == Fraction(1, 3)


def test_ctmc_rescaling():
    ctmc = build_chain([{1: 1}, {1: 1}], [1, 0], rates=[2, 5])
    r = compute_evts(EvtRequest(chain=ctmc, method="lu-exact", epsilon=0))
    assert r.values[0] == Fraction(1, 2)
    assert r.values[1] == INF


def test_ctmc_consistency_with_embedded():
    for seed in range(20):
        ctmc = generate_random_chain(seed, 4 + seed % 12, density=0.4,
                                     bscc_count=1 + seed % 2, ctmc=True)
        emb_values = oracle_evts(
            build_chain_from(ctmc))
        r = compute_evts(EvtRequest(chain=ctmc, method="lu-exact", epsilon=0))
        for v, rate, ev in zip(r.values, ctmc.rates, emb_values):
            if ev == INF:
                assert v == INF
            else:
                assert v * rate == ev


def build_chain_from(ctmc):
    from evtkit.model import embed

    return embed(ctmc)


def test_classification_unreachable_and_recurrent():
    # state 2 is unreachable, state 1 is absorbing and reachable
    chain = build_chain([{1: 1}, {1: 1}, {1: 1}], [1, 0, 0])
    r = compute_evts(EvtRequest(chain=chain, method="lu-exact", epsilon=0))
    assert r.values == [Fraction(1), INF, Fraction(0)]


def test_bscc_only_chain():
    chain = build_chain([{0: 1}, {1: 1}], [Fraction(1, 2), Fraction(1, 2)])
    r = compute_evts(EvtRequest(chain=chain, method="lu-exact", epsilon=0))
    assert r.values == [INF, INF]
    assert r.iterations == 0


def test_ii_certified_on_seven_state(seven_float):
    r = compute_evts(EvtRequest(chain=seven_float, method="ii",
                                criterion="rel", epsilon=1e-4))
    truth = [float(v) for v in SEVEN_EXACT_EVTS]
    assert diff("rel", finite_part(r.values), truth) <= 1e-4
    assert r.certified_bound == 1e-4
    assert r.lower_values is not None


def test_certification_matrix(seven_float, seven_rational):
    # certified: ii/gs-ii at epsilon, exact elimination at 0; never vi or
    # float elimination
    for method, chain, expected in [
        ("vi", seven_float, None),
        ("gs-vi", seven_float, None),
        ("lu", seven_float, None),
        ("ii", seven_float, 1e-6),
        ("gs-ii", seven_float, 1e-6),
        ("lu", seven_rational, Fraction(0)),
        ("lu-exact", seven_rational, Fraction(0)),
    ]:
        r = compute_evts(EvtRequest(chain=chain, method=method,
                                    criterion="rel", epsilon=1e-6))
        assert r.certified_bound == expected if expected is not None \
            else r.certified_bound is None
        assert r.certified == (expected is not None)


def test_epsilon_zero_requires_exact(seven_float):
    with pytest.raises(EvtkitError, match="exact"):
        compute_evts(EvtRequest(chain=seven_float, method="ii", epsilon=0))


def test_lu_exact_requires_rational(seven_float):
    with pytest.raises(EvtkitError, match="rational"):
        compute_evts(EvtRequest(chain=seven_float, method="lu-exact",
                                epsilon=0))


def test_topological_exact_equals_plain(seven_rational):
    plain = compute_evts(EvtRequest(chain=seven_rational, method="lu-exact",
                                    epsilon=0))
    topo = topological_evts_relative(seven_rational, "lu-exact", 0)
    assert topo.values == plain.values
    assert topo.certified_bound == 0


def test_topological_exact_equals_plain_random():
    for seed in range(25):
        chain = generate_random_chain(seed + 50, 3 + seed % 15, density=0.45,
                                      bscc_count=1 + seed % 3)
        plain = compute_evts(EvtRequest(chain=chain, method="lu-exact",
                                        epsilon=0))
        topo = topological_evts_relative(chain, "lu-exact", 0)
        assert topo.values == plain.values


def test_topological_relative_budget_single_scc():
    # one non-bottom component: the per-component budget equals epsilon
    chain = build_chain([{0: Fraction(1, 2), 1: Fraction(1, 2)}, {1: 1}],
                        [1, 0])
    dec = decompose(chain)
    assert dec.longest_chain == 0
    r = topological_evts_relative(chain.to_float(), "ii", 1e-3)
    assert abs(r.values[0] - 2.0) <= 2.0 * 1e-3


def test_topological_relative_certified_random():
    for seed in range(25):
        chain = generate_random_chain(seed + 200, 4 + seed % 16, density=0.4,
                                      bscc_count=1 + seed % 3)
        exact = oracle_evts(chain)
        r = topological_evts_relative(chain.to_float(), "ii", 1e-3)
        for v, e in zip(r.values, exact):
            if e == INF:
                assert v == INF
            elif e == 0:
                assert v == 0
            else:
                assert abs(Fraction(v) - e) / e <= Fraction(1, 1000)
        assert r.certified_bound == 1e-3


def test_topological_absolute_threshold_seven_state(seven_rational):
    dec = decompose(seven_rational)
    sigma = _absolute_threshold(seven_rational, dec, Fraction(1, 10), False)
    # q = min(1/2, 1/2, 1, 1/10) = 1/10; T = 2; L = 2 => eps / 61
    assert sigma == Fraction(1, 10) / 61


def test_topological_absolute_certified_random():
    for seed in range(25):
        chain = generate_random_chain(seed + 400, 4 + seed % 16, density=0.4,
                                      bscc_count=1 + seed % 3)
        exact = oracle_evts(chain)
        r = topological_evts_absolute(chain.to_float(), "ii", 1e-2)
        for v, e in zip(r.values, exact):
            if e == INF:
                assert v == INF
            else:
                assert abs(Fraction(v) - e) <= Fraction(1, 100)
        assert r.certified_bound == 1e-2


def test_topological_absolute_threshold_underflow():
    # a long ladder of 2-cycles with two incoming edges per component makes
    # the amplification term overflow any float, so the absolute budget
    # cannot be represented and the driver must say so
    pairs = 1040
    rows = []
    for i in range(pairs):
        a, b = 2 * i, 2 * i + 1
        nxt = 2 * (i + 1) if i + 1 < pairs else 2 * pairs
        rows.append({b: Fraction(1, 2), nxt: Fraction(1, 2)})
        rows.append({a: Fraction(1, 2), nxt: Fraction(1, 2)})
    rows.append({2 * pairs: 1})
    chain = build_chain(rows, [1] + [0] * (2 * pairs), backend=FLOAT)
    with pytest.raises(SolverError, match="rational"):
        topological_evts_absolute(chain, "ii", 1e-3)


def test_topological_vi_stamped_unsound(seven_float):
    r = topological_evts_relative(seven_float, "vi", 1e-3)
    assert r.certified_bound is None
    truth = [float(v) for v in SEVEN_EXACT_EVTS]
    # still near the truth on this benign instance
    assert diff("rel", finite_part(r.values), truth) <= 1e-2


def test_topological_relative_rejects_large_epsilon(seven_float):
    with pytest.raises(EvtkitError, match="1"):
        topological_evts_relative(seven_float, "ii", 1.5)


def test_topological_threads_bit_identical(seven_rational):
    sequential = topological_evts_relative(seven_rational, "lu-exact", 0)
    threaded = topological_evts_relative(seven_rational, "lu-exact", 0,
                                         threads=4)
    assert sequential.values == threaded.values
    big = generate_random_chain(9, 18, density=0.35, bscc_count=3)
    a = topological_evts_relative(big, "lu-exact", 0)
    b = topological_evts_relative(big, "lu-exact", 0, threads=3)
    assert a.values == b.values


def test_gs_variants_agree(seven_float):
    truth = [float(v) for v in SEVEN_EXACT_EVTS]
    for method in ("gs-vi", "gs-ii"):
        r = compute_evts(EvtRequest(chain=seven_float, method=method,
                                    criterion="abs", epsilon=1e-8))
        assert diff("abs", finite_part(r.values), truth) <= 1e-6
    assert compute_evts(EvtRequest(chain=seven_float, method="gs-ii",
                                   criterion="abs",
                                   epsilon=1e-8)).certified_bound == 1e-8


def test_ctmc_absolute_certificate_tightens():
    # rates below 1 magnify absolute errors; the certificate must survive
    ctmc = build_chain(
        [{0: Fraction(1, 2), 1: Fraction(1, 2)}, {1: 1}], [1, 0],
        rates=[Fraction(1, 10), 1]).to_float()
    r = compute_evts(EvtRequest(chain=ctmc, method="ii", criterion="abs",
                                epsilon=1e-3))
    # true embedded value 2, rate 1/10 -> 20
    assert abs(r.values[0] - 20.0) <= 1e-3
    assert r.certified_bound == 1e-3
