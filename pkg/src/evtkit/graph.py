"""SCC analysis, transient/recurrent classification, SCC restrictions, and
the graph-derived quantities feeding the sound solvers.

``decompose`` labels SCCs so that id order is a topological order: an edge
from SCC i to SCC j (i != j) implies i < j.  Non-bottom SCCs house exactly
the transient states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EvtkitError
from .model import MarkovChain
from .scalars import RATIONAL, one, zero
from .solve import Bounds


@dataclass
class SccDecomposition:
    """SCC membership plus the statistics used by the error budgets:

    - ``longest_chain`` (L): edge count of the longest path through
      non-bottom SCCs in the condensation,
    - ``max_incoming`` (T): maximal number of transition pairs entering a
      non-bottom SCC from outside,
    - ``reachable``: per-state flag for positive probability from the
      initial distribution.
    """

    scc_of: list[int]
    members: list[list[int]]
    is_bottom: list[bool]
    topo_order: list[int]
    longest_chain: int
    max_incoming: int
    reachable: list[bool]
    _transient: list[int] = field(default=None, repr=False)

    @property
    def n_sccs(self) -> int:
        return len(self.members)

    @property
    def transient_states(self) -> list[int]:
        """States in non-bottom SCCs, ascending."""
        if self._transient is None:
            self._transient = sorted(
                s for s in range(len(self.scc_of)) if not self.is_bottom[self.scc_of[s]]
            )
        return self._transient

    @property
    def bottom_sccs(self) -> list[int]:
        return [c for c in range(self.n_sccs) if self.is_bottom[c]]

    @property
    def non_bottom_sccs(self) -> list[int]:
        return [c for c in range(self.n_sccs) if not self.is_bottom[c]]

    def is_transient(self, s: int) -> bool:
        return not self.is_bottom[self.scc_of[s]]


def decompose(chain: MarkovChain) -> SccDecomposition:
    """Tarjan-style linear-time SCC decomposition with relabeled ids.

    Tarjan emits components in reverse topological order; ids are flipped so
    that ascending id is a linear extension of the reachability order.
    """
    n = chain.n
    raw_id = [-1] * n
    components: list[list[int]] = []
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        # explicit work stack: (state, iterator position over its row)
        work = [(root, 0)]
        while work:
            v, pi = work.pop()
            if pi == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            row = chain.rows[v]
            advanced = False
            while pi < len(row):
                w = row[pi][0]
                pi += 1
                if index[w] == -1:
                    work.append((v, pi))
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    raw_id[w] = len(components)
                    comp.append(w)
                    if w == v:
                        break
                comp.sort()
                components.append(comp)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])

    n_sccs = len(components)
    members = [components[n_sccs - 1 - c] for c in range(n_sccs)]
    scc_of = [0] * n
    for c, comp in enumerate(members):
        for s in comp:
            scc_of[s] = c

    is_bottom = [True] * n_sccs
    incoming_pairs = [0] * n_sccs
    for s in range(n):
        c = scc_of[s]
        for t, p in chain.rows[s]:
            if p == 0:
                continue
            c2 = scc_of[t]
            if c2 != c:
                is_bottom[c] = False
                incoming_pairs[c2] += 1

    # longest chain of non-bottom SCCs: DP over the condensation; ascending
    # id is a topological order, so one sweep settles the depths
    depth = [0] * n_sccs
    for c in range(n_sccs):
        if is_bottom[c]:
            continue
        for s in members[c]:
            for t, p in chain.rows[s]:
                c2 = scc_of[t]
                if p != 0 and c2 != c and not is_bottom[c2]:
                    depth[c2] = max(depth[c2], depth[c] + 1)
    longest = max((depth[c] for c in range(n_sccs) if not is_bottom[c]), default=0)
    max_in = max(
        (incoming_pairs[c] for c in range(n_sccs) if not is_bottom[c]), default=0
    )

    reachable = [False] * n
    frontier = [s for s in range(n) if chain.init[s] > 0]
    for s in frontier:
        reachable[s] = True
    while frontier:
        s = frontier.pop()
        for t, p in chain.rows[s]:
            if p != 0 and not reachable[t]:
                reachable[t] = True
                frontier.append(t)

    return SccDecomposition(
        scc_of=scc_of,
        members=members,
        is_bottom=is_bottom,
        topo_order=list(range(n_sccs)),
        longest_chain=longest,
        max_incoming=max_in,
        reachable=reachable,
    )


@dataclass
class SccRestriction:
    """One non-bottom SCC viewed as a stand-alone system.

    ``initial_values`` carry the inflow from topologically earlier states:
    iota_hat(s) = init(s) + sum over external predecessors P(s', s) * x(s').
    Their total ``mass`` may exceed 1; probability leaving the SCC implicitly
    feeds an absorbing sink.
    """

    scc_id: int
    states: list[int]
    local_rows: list[list[tuple]]
    initial_values: list
    mass: object
    backend: str

    @property
    def size(self) -> int:
        return len(self.states)

    def has_self_loop(self, local_index: int) -> bool:
        return any(t == local_index for t, _ in self.local_rows[local_index])


def build_restriction(chain: MarkovChain, scc: SccDecomposition, scc_id: int,
                      x: list) -> SccRestriction:
    """Restriction of the chain to one non-bottom SCC with inflow values ``x``.

    ``x`` is indexed by original state and must be defined (non-negative) for
    every state with an edge into the SCC.
    """
    if scc.is_bottom[scc_id]:
        raise EvtkitError("restrictions are built for non-bottom SCCs only")
    states = scc.members[scc_id]
    member_set = set(states)
    pos = {s: i for i, s in enumerate(states)}
    iota = []
    for s in states:
        acc = chain.init[s]
        for t, p in chain.incoming(s):
            if t in member_set or p == 0:
                continue
            xv = x[t]
            if xv < 0:
                raise EvtkitError(
                    f"negative inflow value {xv!r} for state {chain.names[t]!r}"
                )
            acc = acc + p * xv
        iota.append(acc)
    local_rows = [
        [(pos[t], p) for t, p in chain.rows[s] if t in member_set]
        for s in states
    ]
    return SccRestriction(
        scc_id=scc_id,
        states=list(states),
        local_rows=local_rows,
        initial_values=iota,
        mass=sum(iota, zero(chain.backend)),
        backend=chain.backend,
    )


def escape_lower_bound(chain: MarkovChain, scc: SccDecomposition, scc_id: int) -> dict:
    """Sound per-state lower bound q on the never-return probability.

    Leaving the SCC forbids ever returning to it, so the product of
    transition probabilities along a simple path from s out of the SCC
    bounds 1 - Pr_s(return) from below.  The path is chosen by a backward
    BFS from the exit states; ties prefer the heavier edge, then the lower
    state index.  A singleton without a self-loop cannot be revisited at
    all, so its bound is 1.
    """
    if scc.is_bottom[scc_id]:
        raise EvtkitError("escape bound requested for a bottom SCC")
    states = scc.members[scc_id]
    member_set = set(states)
    if len(states) == 1:
        s = states[0]
        p_self = chain.probability(s, s)
        if p_self is None or p_self == 0:
            return {s: one(chain.backend)}
        exits = [p for t, p in chain.rows[s] if t != s and p > 0]
        if not exits:
            raise EvtkitError("non-bottom SCC without exit edge")
        return {s: max(exits)}

    q: dict[int, object] = {}
    for s in states:
        exits = [p for t, p in chain.rows[s] if t not in member_set and p > 0]
        if exits:
            q[s] = max(exits)
    if not q:
        raise EvtkitError("non-bottom SCC without exit edge")

    preds = {s: [] for s in states}
    for s in states:
        for t, p in chain.rows[s]:
            if t in member_set and p > 0 and t != s:
                preds[t].append((s, p))

    frontier = sorted(q)
    while frontier:
        candidates: dict[int, tuple] = {}
        for t in frontier:
            for s, p in preds[t]:
                if s in q:
                    continue
                best = candidates.get(s)
                # prefer the heavier edge into the settled layer, then low index
                if best is None or (p, -t) > (best[0], -best[1]):
                    candidates[s] = (p, t)
        for s, (p, t) in candidates.items():
            q[s] = p * q[t]
        frontier = sorted(candidates)
    if len(q) != len(states):
        raise EvtkitError("SCC escape search failed to cover the component")
    return q


def initial_ii_bounds(chain: MarkovChain, scc: SccDecomposition,
                      criterion: str, epsilon, *, restriction: SccRestriction = None,
                      active: list[int] = None) -> Bounds:
    """Sound starting interval for interval iteration.

    Lower bound 0 everywhere; upper bound M / q(s) where M is 1 for a full
    chain and the total inflow mass for an SCC restriction.  The bound holds
    because the expected visits to s are at most (reachable mass) divided by
    the never-return probability.
    """
    if restriction is not None:
        qmap = escape_lower_bound(chain, scc, restriction.scc_id)
        mass = restriction.mass
        upper = [mass / qmap[s] for s in restriction.states]
        n = restriction.size
    else:
        if active is None:
            active = [s for s in scc.transient_states if scc.reachable[s]]
        qmap = {}
        for c in scc.non_bottom_sccs:
            if any(s in qmap for s in scc.members[c]):
                continue
            qmap.update(escape_lower_bound(chain, scc, c))
        m = one(chain.backend)
        upper = [m / qmap[s] for s in active]
        n = len(active)
    lower = [zero(chain.backend)] * n
    if chain.backend != RATIONAL:
        import numpy as np

        lower = np.zeros(n)
        upper = np.array(upper, dtype=float)
    return Bounds(lower=lower, upper=upper, criterion=criterion, epsilon=epsilon)


def global_escape_minimum(chain: MarkovChain, scc: SccDecomposition):
    """min over transient states of the per-SCC never-return bound."""
    best = None
    for c in scc.non_bottom_sccs:
        for value in escape_lower_bound(chain, scc, c).values():
            if best is None or value < best:
                best = value
    return best


def topological_state_order(scc: SccDecomposition, states: list) -> list:
    """Permutation of positions in ``states`` sorted by (SCC topological
    position, state index): an alternative sweep order for the in-place
    solvers that settles upstream components first."""
    return sorted(range(len(states)),
                  key=lambda i: (scc.scc_of[states[i]], states[i]))
