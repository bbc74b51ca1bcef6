"""Stationary distributions via visiting times.

A reducible chain's stationary distribution factors into per-BSCC
reachability probabilities and the stationary distribution of each BSCC in
isolation.  Both factors reduce to visiting times: reachability is read off
the transient visiting times in a single pass, and the distribution inside
an irreducible component B is proportional to the visiting times of the
chain in which every edge into an anchor state v is redirected to a fresh
absorbing copy of v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import solve as kernels
from .errors import EvtkitError, ModelError
from .evt import EvtRequest, _is_exact, compute_evts, system_for_states
from .graph import SccDecomposition, decompose, initial_ii_bounds
from .model import MarkovChain
from .scalars import RATIONAL, one, zero
from .solve import Bounds, EvtSystem

STRATEGIES = ("classic", "evt-reach", "evt-full")


@dataclass
class StationaryResult:
    """Stationary probabilities (0 for transient states) plus the per-BSCC
    reachability split and the certified relative error, when any."""

    values: list
    bscc_reach: dict
    bscc_members: dict
    strategy: str
    method: str
    epsilon: object
    certified_rel_error: object
    iterations: int
    backend: str
    names: list

    def value_of(self, name: str):
        return self.values[self.names.index(name)]


def bscc_reach_probabilities(chain: MarkovChain, dec: SccDecomposition,
                             evt_values: list) -> dict:
    """Reachability probability of every BSCC from the transient visiting
    times: one pass over the incoming edges of BSCC member states.

    The relative error of the visiting times carries over unamplified, since
    only exact coefficients multiply the approximate values.
    """
    reach = {}
    for c in dec.bottom_sccs:
        total = zero(chain.backend)
        for s in dec.members[c]:
            total = total + chain.init[s]
            for t, p in chain.incoming(s):
                if p != 0 and dec.is_transient(t):
                    total = total + p * evt_values[t]
        reach[c] = total
    return reach


def redirect(chain: MarkovChain, v: int) -> tuple[MarkovChain, int]:
    """Redirect every edge into state v to a fresh absorbing copy.

    The result makes the copy the only BSCC; the visiting times of the
    original states are then proportional to the stationary distribution of
    the irreducible input.  Returns the new chain and the copy's index.
    """
    dec = decompose(chain)
    if dec.n_sccs != 1:
        raise EvtkitError("redirection requires an irreducible chain")
    n = chain.n
    hat = n
    hat_name = chain.names[v] + "_hat"
    while hat_name in chain.names:
        hat_name += "'"
    rows = []
    for s in range(n):
        row = [(t if t != v else hat, p) for t, p in chain.rows[s]]
        rows.append(sorted(row))
    rows.append([(hat, one(chain.backend))])
    init = [zero(chain.backend)] * (n + 1)
    init[v] = one(chain.backend)
    return MarkovChain(
        names=list(chain.names) + [hat_name],
        backend=chain.backend,
        rows=rows,
        init=init,
    ), hat


def _anchor_state(chain: MarkovChain) -> int:
    """State with the most incoming transitions; ties pick the lowest index.
    Any choice is correct; a well-connected anchor shortens absorption."""
    best, best_count = 0, -1
    for v in range(chain.n):
        count = sum(1 for _, p in chain.incoming(v) if p != 0)
        if count > best_count:
            best, best_count = v, count
    return best


def stationary_irreducible(chain: MarkovChain, method: str = "ii",
                           epsilon=1e-3,
                           max_iterations=kernels.DEFAULT_MAX_ITERATIONS
                           ) -> tuple[list, object, int]:
    """Stationary distribution of an irreducible chain by normalizing the
    visiting times of the redirected chain.

    With visiting times of relative precision eps the normalized vector is
    within relative 2*eps/(1-eps) of the true distribution.  Returns
    (distribution, certified relative error or None, iterations).
    """
    if chain.n == 1:
        return [one(chain.backend)], zero(chain.backend), 0
    redirected, _hat = redirect(chain, _anchor_state(chain))
    dec = decompose(redirected)
    active = [s for s in range(chain.n)]
    if sorted(dec.transient_states) != active:
        raise EvtkitError("redirection left unexpected recurrent states")
    sys = system_for_states(redirected, active)
    if _is_exact(method, chain.backend) or method == "lu":
        x = kernels.direct_solve(sys)
        iterations = 0
        certified = zero(chain.backend) if _is_exact(method, chain.backend) else None
    elif method in ("ii", "gs-ii"):
        bounds = initial_ii_bounds(redirected, dec, kernels.RELATIVE, epsilon,
                                   active=active)
        run = (kernels.interval_iteration if method == "ii"
               else kernels.gauss_seidel_interval_iteration)
        out = run(sys, bounds, max_iterations)
        x, iterations = out.x, out.iterations
        eps = float(epsilon)
        certified = 2.0 * eps / (1.0 - eps)
    elif method in ("vi", "gs-vi"):
        x0 = kernels._copy([zero(chain.backend)] * sys.n, chain.backend)
        run = (kernels.value_iteration if method == "vi"
               else kernels.gauss_seidel_value_iteration)
        out = run(sys, x0, kernels.RELATIVE, epsilon, max_iterations)
        x, iterations = out.x, out.iterations
        certified = None
    else:
        raise EvtkitError(f"unknown method {method!r}")
    total = sum(x, zero(chain.backend)) if chain.backend == RATIONAL else float(sum(x))
    pi = [xi / total for xi in x]
    return pi, certified, iterations


def stationary_classic_bscc(chain: MarkovChain) -> list:
    """Left fixed vector of the transition matrix with unit total mass,
    solved by elimination (one balance equation replaced by normalization)."""
    n = chain.n
    if n == 1:
        return [one(chain.backend)]
    rows = []
    rows.append([(j, one(chain.backend)) for j in range(n)])
    for t in range(1, n):
        entries = {t: one(chain.backend)}
        for s, p in chain.incoming(t):
            entries[s] = entries.get(s, zero(chain.backend)) - p
        rows.append(sorted(entries.items()))
    rhs = [one(chain.backend)] + [zero(chain.backend)] * (n - 1)
    pi = kernels.solve_linear(rows, rhs, chain.backend)
    return list(pi)


def bscc_chain(chain: MarkovChain, dec: SccDecomposition, c: int) -> MarkovChain:
    """The BSCC as a stand-alone irreducible chain (initial mass on its
    first member; stationary analysis ignores it)."""
    members = dec.members[c]
    pos = {s: i for i, s in enumerate(members)}
    rows = [
        sorted((pos[t], p) for t, p in chain.rows[s])
        for s in members
    ]
    init = [zero(chain.backend)] * len(members)
    init[0] = one(chain.backend)
    return MarkovChain(
        names=[chain.names[s] for s in members],
        backend=chain.backend,
        rows=rows,
        init=init,
    )


def _classic_reach(chain: MarkovChain, dec: SccDecomposition, method: str,
                   epsilon, max_iterations) -> tuple[dict, int]:
    """Baseline reachability: one hitting-probability system per BSCC over
    the transient states that can reach it."""
    transient = dec.transient_states
    iterations = 0
    reach = {}
    for c in dec.bottom_sccs:
        target = set(dec.members[c])
        # backward search: transient states with a path into the BSCC
        can_reach = set()
        frontier = []
        for s in target:
            for t, p in chain.incoming(s):
                if p != 0 and dec.is_transient(t) and t not in can_reach:
                    can_reach.add(t)
                    frontier.append(t)
        while frontier:
            s = frontier.pop()
            for t, p in chain.incoming(s):
                if p != 0 and dec.is_transient(t) and t not in can_reach:
                    can_reach.add(t)
                    frontier.append(t)
        states = sorted(can_reach)
        pos = {s: i for i, s in enumerate(states)}
        rows, tau = [], []
        for s in states:
            row = []
            b = zero(chain.backend)
            for t, p in chain.rows[s]:
                if p == 0:
                    continue
                if t in pos:
                    row.append((pos[t], p))
                elif t in target:
                    b = b + p
            rows.append(row)
            tau.append(b)
        sys = EvtSystem(rows, tau, chain.backend)
        if _is_exact(method, chain.backend) or method == "lu":
            h = kernels.direct_solve(sys)
        elif method in ("ii", "gs-ii"):
            lower = kernels._copy([zero(chain.backend)] * sys.n, chain.backend)
            upper = kernels._copy([one(chain.backend)] * sys.n, chain.backend)
            bounds = Bounds(lower, upper, kernels.RELATIVE, epsilon)
            run = (kernels.interval_iteration if method == "ii"
                   else kernels.gauss_seidel_interval_iteration)
            out = run(sys, bounds, max_iterations)
            h, iterations = out.x, iterations + out.iterations
        else:
            x0 = kernels._copy([zero(chain.backend)] * sys.n, chain.backend)
            run = (kernels.value_iteration if method == "vi"
                   else kernels.gauss_seidel_value_iteration)
            out = run(sys, x0, kernels.RELATIVE, epsilon, max_iterations)
            h, iterations = out.x, iterations + out.iterations
        total = zero(chain.backend)
        for s in dec.members[c]:
            total = total + chain.init[s]
        for s, i in pos.items():
            if chain.init[s] != 0:
                total = total + chain.init[s] * h[i]
        reach[c] = total
    return reach, iterations


def _certified_budget(epsilon: float) -> tuple[float, float, float]:
    """Split a requested relative error into the reachability share eps1 and
    the within-BSCC solver share, composing as e1 + e2 + e1*e2 <= epsilon."""
    eps1 = (math.sqrt(1.0 + epsilon) - 1.0) * (1.0 - 1e-9)
    eps_inner = eps1 / (2.0 + eps1)
    combined = eps1 + eps1 + eps1 * eps1
    return eps1, eps_inner, min(combined, epsilon)


def stationary_distribution(chain: MarkovChain, strategy: str = "evt-full",
                            method: str = "ii", epsilon=1e-3,
                            topological: bool = False, threads: int = 1,
                            max_iterations=kernels.DEFAULT_MAX_ITERATIONS
                            ) -> StationaryResult:
    """Full-chain stationary distribution under the chosen strategy.

    classic   : per-BSCC hitting systems + eigenvector solves (baseline).
    evt-reach : one visiting-time solve for all reachability probabilities,
                eigenvector solves inside BSCCs.
    evt-full  : visiting times for reachability and for the within-BSCC
                distributions; with interval iteration the requested epsilon
                is split so the composed relative error stays certified.
    """
    if chain.is_ctmc:
        raise ModelError(
            "stationary distribution is defined here for discrete-time chains; "
            "analyze the embedded chain explicitly if that is intended")
    if strategy not in STRATEGIES:
        raise EvtkitError(f"unknown strategy {strategy!r}")
    from .evt import METHODS

    if method not in METHODS:
        raise EvtkitError(f"unknown method {method!r}")
    if method == "lu-exact" and chain.backend != RATIONAL:
        raise EvtkitError("lu-exact requires the rational backend")
    dec = decompose(chain)
    backend = chain.backend
    exact = _is_exact(method, backend)
    certified_mode = strategy == "evt-full" and method in ("ii", "gs-ii")
    if exact:
        eps_reach = eps_inner = 0
        certified = zero(backend)
    elif certified_mode:
        eps1, eps_inner, combined = _certified_budget(float(epsilon))
        eps_reach = eps1
        certified = combined
    else:
        eps_reach = eps_inner = epsilon
        certified = None

    iterations = 0
    if strategy == "classic":
        reach, iterations = _classic_reach(chain, dec, method, eps_reach,
                                           max_iterations)
    else:
        evts = compute_evts(EvtRequest(
            chain=chain, method=method, criterion=kernels.RELATIVE,
            epsilon=eps_reach if not exact else 0, topological=topological,
            threads=threads, max_iterations=max_iterations))
        iterations += evts.iterations
        reach = bscc_reach_probabilities(chain, dec, evts.values)
        if certified is not None and evts.certified_bound is None:
            certified = None

    values = [zero(backend)] * chain.n
    for c in dec.bottom_sccs:
        p_reach = reach[c]
        if p_reach == 0:
            continue
        members = dec.members[c]
        sub = bscc_chain(chain, dec, c)
        if strategy == "evt-full":
            pi, inner_cert, inner_iters = stationary_irreducible(
                sub, method=method, epsilon=eps_inner,
                max_iterations=max_iterations)
            iterations += inner_iters
            if certified is not None and inner_cert is None:
                certified = None
        else:
            pi = stationary_classic_bscc(sub)
            if certified is not None and not exact:
                certified = None
        for s, d in zip(members, pi):
            values[s] = p_reach * d

    return StationaryResult(
        values=values,
        bscc_reach=reach,
        bscc_members={c: [chain.names[s] for s in dec.members[c]]
                      for c in dec.bottom_sccs},
        strategy=strategy,
        method=method,
        epsilon=epsilon,
        certified_rel_error=certified,
        iterations=iterations,
        backend=backend,
        names=list(chain.names),
    )
