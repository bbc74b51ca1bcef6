"""Independent exact reference implementations and fixture generators.

Everything here is deliberately naive, dense, and rational-only: expected
visits come from inverting (I - Q) outright, reachability and stationary
vectors from dense elimination, conditional rewards from one system per
target.  None of it shares code with the optimized solvers; that
independence is what makes it usable as a test oracle.
"""

from __future__ import annotations

import random
from collections import deque
from fractions import Fraction

from .errors import EvtkitError, QueryError
from .model import MarkovChain, validate_chain
from .scalars import INF, RATIONAL

ORACLE_SIZE_CAP = 200

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _require_rational(chain: MarkovChain):
    if chain.backend != RATIONAL:
        raise EvtkitError("the oracle works on rational-backend chains only")


def _successors(chain, s):
    return [t for t, p in chain.rows[s] if p != 0]


def _reach_set(chain, start):
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        for t in _successors(chain, s):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def _classify(chain):
    """(reachable flags, recurrent flags) by brute-force reachability:
    s is recurrent iff every state reachable from s reaches s back."""
    n = chain.n
    reach_sets = [_reach_set(chain, s) for s in range(n)]
    recurrent = [all(s in reach_sets[t] for t in reach_sets[s]) for s in range(n)]
    reachable = [False] * n
    for s in range(n):
        if chain.init[s] > 0:
            for t in reach_sets[s]:
                reachable[t] = True
    return reachable, recurrent


def _dense_solve(a, b):
    """Gauss-Jordan on [A | b] over rationals; returns the solution column."""
    n = len(a)
    m = [row[:] + [bv] for row, bv in zip(a, b)]
    for c in range(n):
        pivot = next((r for r in range(c, n) if m[r][c] != 0), None)
        if pivot is None:
            raise EvtkitError("singular oracle system")
        m[c], m[pivot] = m[pivot], m[c]
        pv = m[c][c]
        m[c] = [v / pv for v in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[c])]
    return [m[r][n] for r in range(n)]


def fundamental_matrix(chain: MarkovChain):
    """Dense inverse N = (I - Q)^-1 over the transient states.

    N[s][t] is the expected number of visits to t starting from s.  Returns
    (matrix, transient state list).
    """
    _require_rational(chain)
    _, recurrent = _classify(chain)
    transient = [s for s in range(chain.n) if not recurrent[s]]
    k = len(transient)
    if k > ORACLE_SIZE_CAP:
        raise EvtkitError(f"oracle size cap exceeded: {k} transient states")
    pos = {s: i for i, s in enumerate(transient)}
    m = [[_ONE if i == j else _ZERO for j in range(k)] for i in range(k)]
    for s in transient:
        for t, p in chain.rows[s]:
            if t in pos and p != 0:
                m[pos[s]][pos[t]] -= p
    # Gauss-Jordan inversion against the identity
    aug = [row[:] + [_ONE if i == j else _ZERO for j in range(k)]
           for i, row in enumerate(m)]
    for c in range(k):
        pivot = next((r for r in range(c, k) if aug[r][c] != 0), None)
        if pivot is None:
            raise EvtkitError("transient submatrix is singular")
        aug[c], aug[pivot] = aug[pivot], aug[c]
        pv = aug[c][c]
        aug[c] = [v / pv for v in aug[c]]
        for r in range(k):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [vr - f * vc for vr, vc in zip(aug[r], aug[c])]
    inverse = [row[k:] for row in aug]
    return inverse, transient


def oracle_evts(chain: MarkovChain) -> list:
    """Exact expected visiting times: N^T applied to the restricted initial
    distribution, infinity on reachable recurrent states."""
    _require_rational(chain)
    rates = chain.rates
    work = chain
    if chain.is_ctmc:
        work = MarkovChain(
            names=list(chain.names), backend=RATIONAL,
            rows=[list(r) for r in chain.rows], init=list(chain.init))
    reachable, recurrent = _classify(work)
    inverse, transient = fundamental_matrix(work)
    pos = {s: i for i, s in enumerate(transient)}
    values = [_ZERO] * work.n
    for s in range(work.n):
        if recurrent[s]:
            values[s] = INF if reachable[s] else _ZERO
    for t in transient:
        acc = _ZERO
        for s in transient:
            if work.init[s] != 0:
                acc += work.init[s] * inverse[pos[s]][pos[t]]
        values[t] = acc
    if rates is not None:
        values = [v if v == INF else v / r for v, r in zip(values, rates)]
    return values


def _hitting_probabilities(chain, target: set, inverse=None, transient=None
                           ) -> list:
    """Pr_s(reach target) for every state: h = (I - Q)^-1 b with b the
    one-step entry probabilities (recurrent states score 1 inside the
    target, 0 outside).  The transient inverse may be passed in to serve
    several targets."""
    if inverse is None:
        inverse, transient = fundamental_matrix(chain)
    _, recurrent = _classify(chain)
    pos = {s: i for i, s in enumerate(transient)}
    b = [_ZERO] * len(transient)
    for s in transient:
        for t, p in chain.rows[s]:
            if p != 0 and t not in pos and t in target:
                b[pos[s]] += p
    h = [_ZERO] * chain.n
    for s in range(chain.n):
        if recurrent[s]:
            h[s] = _ONE if s in target else _ZERO
    for s in transient:
        h[s] = sum(inverse[pos[s]][j] * b[j] for j in range(len(transient)))
    return h


def oracle_stationary(chain: MarkovChain) -> list:
    """Exact stationary distribution: per-BSCC eigenvector solves combined
    with per-BSCC hitting probabilities from the initial distribution."""
    _require_rational(chain)
    if chain.is_ctmc:
        raise EvtkitError("oracle stationary distribution is discrete-time only")
    reachable, recurrent = _classify(chain)
    if max(sum(recurrent), chain.n - sum(recurrent)) > ORACLE_SIZE_CAP:
        raise EvtkitError("oracle size cap exceeded")
    inverse, transient = fundamental_matrix(chain)
    # group recurrent states into BSCCs by mutual reachability
    remaining = [s for s in range(chain.n) if recurrent[s]]
    bsccs = []
    while remaining:
        s = remaining[0]
        comp = sorted(_reach_set(chain, s))
        bsccs.append(comp)
        remaining = [t for t in remaining if t not in comp]
    values = [_ZERO] * chain.n
    for comp in bsccs:
        h = _hitting_probabilities(chain, set(comp), inverse, transient)
        p_reach = sum(chain.init[s] * h[s] for s in range(chain.n))
        if p_reach == 0:
            continue
        k = len(comp)
        pos = {s: i for i, s in enumerate(comp)}
        # pi = pi P with sum pi = 1; first balance equation replaced
        a = [[_ONE for _ in range(k)]]
        b = [_ONE] + [_ZERO] * (k - 1)
        for t in comp[1:]:
            row = [_ZERO] * k
            row[pos[t]] += _ONE
            for s in comp:
                p = next((pv for tv, pv in chain.rows[s] if tv == t), _ZERO)
                row[pos[s]] -= p
            a.append(row)
        pi = _dense_solve(a, b)
        for s in comp:
            values[s] = p_reach * pi[pos[s]]
    return values


def oracle_condrew(chain: MarkovChain, rewards: list, r: int):
    """Per-target baseline for conditional expected rewards on an absorbing
    chain: one hitting solve plus one reward-weighted solve for THIS target."""
    _require_rational(chain)
    reachable, recurrent = _classify(chain)
    if not recurrent[r]:
        raise QueryError("target must be an absorbing state")
    h = _hitting_probabilities(chain, {r})
    prob = sum(chain.init[s] * h[s] for s in range(chain.n))
    if prob == 0:
        raise QueryError("unreachable target")
    if rewards[r] > 0:
        return INF
    transient = [s for s in range(chain.n) if not recurrent[s]]
    if any(recurrent[s] and reachable[s] and rewards[s] > 0 and h[s] > 0
           for s in range(chain.n)):
        return INF
    pos = {s: i for i, s in enumerate(transient)}
    k = len(transient)
    # w(s) = E_s[reward collected * indicator(reach r)]
    a = [[_ONE if i == j else _ZERO for j in range(k)] for i in range(k)]
    b = [_ZERO] * k
    for s in transient:
        b[pos[s]] += rewards[s] * h[s]
        for t, p in chain.rows[s]:
            if t in pos and p != 0:
                a[pos[s]][pos[t]] -= p
    w = _dense_solve(a, b) if k else []
    expected = sum(chain.init[s] * w[pos[s]] for s in transient)
    return expected / prob


def oracle_return_probability(chain: MarkovChain, s: int) -> Fraction:
    """Exact probability of revisiting s after at least one step."""
    _require_rational(chain)
    if chain.n > ORACLE_SIZE_CAP:
        raise EvtkitError("oracle size cap exceeded")
    # states that can reach s, excluding s itself
    into = {t for t in range(chain.n) if s in _reach_set(chain, t)}
    into.discard(s)
    states = sorted(into)
    pos = {t: i for i, t in enumerate(states)}
    k = len(states)
    a = [[_ONE if i == j else _ZERO for j in range(k)] for i in range(k)]
    b = [_ZERO] * k
    for t in states:
        for u, p in chain.rows[t]:
            if p == 0:
                continue
            if u == s:
                b[pos[t]] += p
            elif u in pos:
                a[pos[t]][pos[u]] -= p
    g = _dense_solve(a, b) if k else []
    total = _ZERO
    for u, p in chain.rows[s]:
        if p == 0:
            continue
        if u == s:
            total += p
        elif u in pos:
            total += p * g[pos[u]]
    return total


def oracle_expected_total_reward(chain: MarkovChain, rewards: list):
    """Unconditional expected total reward; infinite when a reachable
    recurrent state carries reward."""
    values = oracle_evts(chain)
    reachable, recurrent = _classify(chain)
    if any(recurrent[s] and reachable[s] and rewards[s] > 0
           for s in range(chain.n)):
        return INF
    return sum(rewards[s] * values[s]
               for s in range(chain.n) if not recurrent[s])


def generate_fdr(N: int) -> MarkovChain:
    """Fair-coin dice roller chain for a uniform output in 1..N.

    States are the reachable (v, c) configurations of the doubling loop:
    start (1, 0); a flip maps (v, c) to (2v, 2c) or (2v, 2c + 1); once
    v >= N the walk emits face c+1 when c < N and otherwise continues from
    (v - N, c - N).  Faces are absorbing; every transition has probability
    one half, making each face exactly 1/N likely.
    """
    if N < 1:
        raise EvtkitError("the dice roller needs N >= 1")
    half = Fraction(1, 2)

    def normalize(v, c):
        while v >= N:
            if c < N:
                return ("face", c + 1)
            v, c = v - N, c - N
        return ("conf", v, c)

    start = normalize(1, 0)
    configs = []
    seen = {}
    queue = deque()
    if start[0] == "conf":
        seen[start] = 0
        configs.append(start)
        queue.append(start)
    while queue:
        node = queue.popleft()
        for bit in (0, 1):
            child = normalize(2 * node[1], 2 * node[2] + bit)
            if child[0] == "conf" and child not in seen:
                seen[child] = len(configs)
                configs.append(child)
                queue.append(child)

    names = [f"v{v}c{c}" for _, v, c in configs]
    names += [f"face{k}" for k in range(1, N + 1)]
    face_index = {k: len(configs) + k - 1 for k in range(1, N + 1)}
    rows = []
    for node in configs:
        row = {}
        for bit in (0, 1):
            child = normalize(2 * node[1], 2 * node[2] + bit)
            idx = (seen[child] if child[0] == "conf"
                   else face_index[child[1]])
            row[idx] = row.get(idx, _ZERO) + half
        rows.append(sorted(row.items()))
    for k in range(1, N + 1):
        rows.append([(face_index[k], _ONE)])
    init = [_ZERO] * len(names)
    if start[0] == "conf":
        init[0] = _ONE
    else:
        init[face_index[start[1]]] = _ONE
    return validate_chain(MarkovChain(
        names=names, backend=RATIONAL, rows=rows, init=init))


def generate_random_chain(seed: int, n: int, density: float = 0.4,
                          bscc_count: int = 1, ctmc: bool = False,
                          reward: bool = False) -> MarkovChain:
    """Reproducible random chain with exact rational probabilities.

    Probabilities in each row share one denominator of at most 64 (or the
    row's fan-out when larger), so exact arithmetic stays fast.  With
    bscc_count >= 2 that many absorbing sink states guarantee the requested
    number of BSCCs; bscc_count <= 1 leaves the topology unconstrained.
    """
    if n < 1:
        raise EvtkitError("need at least one state")
    if not 0 < density <= 1:
        raise EvtkitError("density must be in (0, 1]")
    if bscc_count > n:
        raise EvtkitError(f"cannot fit {bscc_count} BSCCs into {n} states")
    rng = random.Random(seed)
    sinks = list(range(n - bscc_count, n)) if bscc_count >= 2 else []
    fan_out = max(1, round(density * n))

    def composition(parts, targets):
        d = rng.randint(max(2, parts), max(64, parts))
        if parts == 1:
            return [(targets[0], _ONE)]
        cuts = sorted(rng.sample(range(1, d), parts - 1))
        weights = [b - a for a, b in zip([0] + cuts, cuts + [d])]
        return sorted((t, Fraction(w, d)) for t, w in zip(targets, weights))

    rows = []
    for s in range(n):
        if s in sinks:
            rows.append([(s, _ONE)])
            continue
        targets = rng.sample(range(n), min(fan_out, n))
        rows.append(composition(len(targets), sorted(targets)))

    init_support = rng.sample(range(n), rng.randint(1, min(3, n)))
    init_entries = composition(len(init_support), sorted(init_support))
    init = [_ZERO] * n
    for s, p in init_entries:
        init[s] = p

    rates = None
    if ctmc:
        rates = [Fraction(rng.randint(1, 64), rng.randint(1, 16))
                 for _ in range(n)]
    rewards = {}
    if reward:
        rewards["r"] = [
            Fraction(rng.randint(0, 8), rng.randint(1, 8)) for _ in range(n)
        ]
    return validate_chain(MarkovChain(
        names=[f"s{i}" for i in range(n)], backend=RATIONAL, rows=rows,
        init=init, rates=rates, rewards=rewards))
