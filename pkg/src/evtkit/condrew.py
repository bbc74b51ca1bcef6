"""Conditional expected total rewards to each absorbing target.

All targets are served by visiting times plus ONE auxiliary system

    y(s) = rew(s) * evt(s) + sum_t P(t, s) * y(t)        (transient s)

followed by a quotient per absorbing target r:

    E[reward | reach r] = sum_t P(t, r) * y(t)
                          / (init(r) + sum_t P(t, r) * evt(t)).

The standard baseline solves one system per target; the oracle module keeps
that form for cross-checking.  Larger BSCCs are collapsed to single
absorbing states first; a positive reward inside a reachable BSCC makes the
conditional reward for that target infinite outright.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import solve as kernels
from .errors import EvtkitError, ModelError, QueryError
from .evt import EvtRequest, _is_exact, compute_evts, system_for_states
from .graph import decompose
from .model import MarkovChain, embed
from .scalars import INF, one, zero


@dataclass
class CollapsedChain:
    """Absorbing derivative of a chain: every BSCC squeezed into one state.

    The transient part is untouched (original relative order); each BSCC
    appears as one absorbing state in place of its lowest member, so a
    chain that is already absorbing collapses to itself.
    ``positive_reward`` flags collapsed states whose BSCC was reachable and
    carried reward.
    """

    chain: MarkovChain
    rewards: list
    transient_indices: list
    absorbing_states: list
    bscc_state: dict
    positive_reward: list
    original_index: dict


def collapse_bsccs(chain: MarkovChain, rewards: list) -> CollapsedChain:
    """Reroute edges into each BSCC to a fresh absorbing state.

    Intra-BSCC edges are dropped, collapsed-state rewards are zero, and a
    flag records whether the BSCC was reachable with positive reward (its
    conditional expected reward is infinite, no numerics needed).
    """
    if chain.is_ctmc:
        raise ModelError("collapse operates on discrete-time chains")
    if len(rewards) != chain.n:
        raise EvtkitError("reward vector length mismatch")
    dec = decompose(chain)
    # keep transient states; one representative slot per BSCC, ordered by
    # its lowest member so absorbing inputs map to themselves
    kept = [("tr", s, s) for s in dec.transient_states]
    kept += [("bscc", c, min(dec.members[c])) for c in dec.bottom_sccs]
    kept.sort(key=lambda entry: entry[2])

    names, collapsed_of, bscc_state = [], {}, {}
    transient_indices, absorbing, positive = [], [], []
    taken = {chain.names[s] for s in dec.transient_states}
    multi_count = 0
    for kind, key, anchor in kept:
        idx = len(names)
        if kind == "tr":
            names.append(chain.names[key])
            collapsed_of[key] = idx
            transient_indices.append(idx)
            positive.append(False)
            continue
        members = dec.members[key]
        if len(members) == 1:
            name = chain.names[members[0]]
        else:
            name = f"bscc{multi_count}"
            multi_count += 1
            while name in taken:
                name += "'"
        taken.add(name)
        names.append(name)
        bscc_state[key] = idx
        absorbing.append(idx)
        for s in members:
            collapsed_of[s] = idx
        positive.append(
            any(dec.reachable[s] and rewards[s] > 0 for s in members))

    rows = [None] * len(names)
    for s in dec.transient_states:
        acc = {}
        for t, p in chain.rows[s]:
            if p == 0:
                continue
            t2 = collapsed_of[t]
            acc[t2] = acc.get(t2, zero(chain.backend)) + p
        rows[collapsed_of[s]] = sorted(acc.items())
    for idx in absorbing:
        rows[idx] = [(idx, one(chain.backend))]

    init = [zero(chain.backend)] * len(names)
    for s in range(chain.n):
        if chain.init[s] != 0:
            init[collapsed_of[s]] = init[collapsed_of[s]] + chain.init[s]

    new_rewards = [zero(chain.backend)] * len(names)
    for s in dec.transient_states:
        new_rewards[collapsed_of[s]] = rewards[s]

    collapsed = MarkovChain(
        names=names, backend=chain.backend, rows=rows, init=init,
        rewards={"__collapsed__": new_rewards},
    )
    return CollapsedChain(
        chain=collapsed,
        rewards=new_rewards,
        transient_indices=transient_indices,
        absorbing_states=absorbing,
        bscc_state=bscc_state,
        positive_reward=positive,
        original_index={chain.names[s]: collapsed_of[s] for s in range(chain.n)},
    )


def solve_y(collapsed: CollapsedChain, evts, method: str = "lu",
            evt_values: list | None = None):
    """Solve the auxiliary system: same matrix as the visiting-time system,
    right-hand side rew * evt.  Returns the full-length y vector (zero on
    absorbing states)."""
    chain = collapsed.chain
    values = evt_values if evt_values is not None else evts.values
    dec = decompose(chain)
    active = [s for s in dec.transient_states if dec.reachable[s]]
    tau = [collapsed.rewards[s] * values[s] for s in active]
    sys = system_for_states(chain, active, tau=tau)
    y_active = kernels.direct_solve(sys)
    y = [zero(chain.backend)] * chain.n
    for i, s in enumerate(active):
        y[s] = y_active[i]
    return y


def conditional_expected_reward(collapsed: CollapsedChain, evts, y, r: int):
    """Conditional expected total reward for absorbing target r.

    ``evts``/``y`` are full-length vectors over the collapsed chain (an
    AnalysisResult is accepted for ``evts``).  Raises for unreachable
    targets; returns infinity when the target BSCC carried reward.
    """
    values = evts.values if hasattr(evts, "values") else evts
    chain = collapsed.chain
    if r not in collapsed.absorbing_states:
        raise QueryError(f"state {chain.names[r]!r} is not an absorbing target")
    num = zero(chain.backend)
    den = chain.init[r]
    for t, p in chain.incoming(r):
        if t == r or p == 0:
            continue
        den = den + p * values[t]
        num = num + p * y[t]
    if den == 0:
        raise QueryError(f"target {chain.names[r]!r} is unreachable")
    if collapsed.positive_reward[r]:
        return INF
    return num / den


def conditional_reward_interval(collapsed: CollapsedChain, lower, upper,
                                y_lower, y_upper, r: int) -> tuple:
    """Two-sided enclosure from bracketing visiting times.

    With l <= evt <= u and y_l, y_u solved from rew*l and rew*u, the true
    conditional reward lies in
    [num(y_l) / (init + P.u), num(y_u) / (init + P.l)].
    """
    chain = collapsed.chain
    num_lo = num_hi = zero(chain.backend)
    den_lo = den_hi = chain.init[r]
    for t, p in chain.incoming(r):
        if t == r or p == 0:
            continue
        num_lo = num_lo + p * y_lower[t]
        num_hi = num_hi + p * y_upper[t]
        den_lo = den_lo + p * lower[t]
        den_hi = den_hi + p * upper[t]
    if den_lo == 0 and den_hi == 0:
        raise QueryError(f"target {chain.names[r]!r} is unreachable")
    lo = num_lo / den_hi if den_hi != 0 else zero(chain.backend)
    hi = num_hi / den_lo if den_lo != 0 else INF
    return lo, hi


@dataclass
class CondRewResult:
    values: dict
    probabilities: dict
    intervals: dict | None
    reward_name: str
    method: str
    epsilon: object
    iterations: int
    backend: str


def conditional_rewards(chain: MarkovChain, reward_name: str | None = None,
                        method: str = "lu", epsilon=1e-3,
                        criterion: str = kernels.RELATIVE,
                        targets: list | None = None,
                        topological: bool = False,
                        max_iterations=kernels.DEFAULT_MAX_ITERATIONS
                        ) -> CondRewResult:
    """Conditional expected rewards toward every (or selected) absorbing
    target, from one visiting-time solve and one auxiliary solve.

    Continuous time reduces to the embedded chain with rewards divided by
    the exit rates.  Targets may be named by the collapsed state or by any
    member of the BSCC.  With interval iteration the result also carries
    per-target enclosures derived from the final bounds.
    """
    if reward_name is None:
        if len(chain.rewards) != 1:
            raise ModelError(
                "conditional rewards need exactly one reward structure "
                "or an explicit name")
        reward_name = next(iter(chain.rewards))
    if reward_name not in chain.rewards:
        raise ModelError(f"unknown reward structure {reward_name!r}")
    rewards = chain.rewards[reward_name]
    work = chain
    if chain.is_ctmc:
        rewards = [w / r for w, r in zip(rewards, chain.rates)]
        work = embed(chain)

    collapsed = collapse_bsccs(work, rewards)
    evts = compute_evts(EvtRequest(
        chain=collapsed.chain, method=method, criterion=criterion,
        epsilon=epsilon if not _is_exact(method, work.backend) else 0,
        topological=topological, max_iterations=max_iterations))
    y = solve_y(collapsed, evts, method=method)

    interval_data = None
    if evts.lower_values is not None:
        y_lower = solve_y(collapsed, evts, method=method,
                          evt_values=evts.lower_values)
        y_upper = solve_y(collapsed, evts, method=method,
                          evt_values=evts.upper_values)
        interval_data = (evts.lower_values, evts.upper_values, y_lower, y_upper)

    names = collapsed.chain.names
    if targets is None:
        requested = collapsed.absorbing_states
        explicit = False
    else:
        requested = []
        explicit = True
        for token in targets:
            if token in names:
                idx = names.index(token)
            elif token in collapsed.original_index:
                idx = collapsed.original_index[token]
            else:
                raise QueryError(f"unknown target state {token!r}")
            if idx not in collapsed.absorbing_states:
                raise QueryError(f"state {token!r} is not in a BSCC")
            requested.append(idx)

    values, probs, intervals = {}, {}, {}
    for r in requested:
        name = names[r]
        prob = collapsed.chain.init[r]
        for t, p in collapsed.chain.incoming(r):
            if t != r and p != 0:
                prob = prob + p * evts.values[t]
        if prob == 0:
            if explicit:
                raise QueryError(f"target {name!r} is unreachable")
            continue
        probs[name] = prob
        if collapsed.positive_reward[r]:
            values[name] = INF
            if interval_data is not None:
                intervals[name] = (INF, INF)
            continue
        values[name] = conditional_expected_reward(collapsed, evts, y, r)
        if interval_data is not None:
            intervals[name] = conditional_reward_interval(
                collapsed, interval_data[0], interval_data[1],
                interval_data[2], interval_data[3], r)

    return CondRewResult(
        values=values,
        probabilities=probs,
        intervals=intervals if interval_data is not None else None,
        reward_name=reward_name,
        method=method,
        epsilon=epsilon,
        iterations=evts.iterations,
        backend=work.backend,
    )
