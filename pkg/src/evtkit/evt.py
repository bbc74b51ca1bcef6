"""End-to-end expected visiting time computation.

Ties together classification, solver selection, and the SCC-topological
drivers.  Reachable recurrent states get value infinity, unreachable states
0, and the transient remainder comes from the selected kernel.  Continuous
time reduces to the embedded chain: visiting times divide by the exit rate.
"""

from __future__ import annotations

import math
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor
from concurrent.futures import wait as futures_wait
from dataclasses import dataclass
from fractions import Fraction

from . import solve as kernels
from .errors import EvtkitError, SolverError
from .graph import (
    SccDecomposition,
    build_restriction,
    decompose,
    global_escape_minimum,
    initial_ii_bounds,
)
from .model import MarkovChain, embed
from .scalars import INF, RATIONAL, zero
from .solve import EvtSystem

METHODS = ("vi", "gs-vi", "ii", "gs-ii", "lu", "lu-exact")
ITERATIVE = ("vi", "gs-vi", "ii", "gs-ii")
SOUND_ITERATIVE = ("ii", "gs-ii")


@dataclass
class AnalysisResult:
    """Per-state values plus the certification metadata of the run."""

    values: list
    method: str
    criterion: str
    epsilon: object
    certified_bound: object
    iterations: int
    backend: str
    names: list
    topological: bool = False
    lower_values: list | None = None
    upper_values: list | None = None

    @property
    def certified(self) -> bool:
        return self.certified_bound is not None

    def value_of(self, name: str):
        return self.values[self.names.index(name)]


@dataclass
class EvtRequest:
    chain: MarkovChain
    method: str = "ii"
    criterion: str = kernels.RELATIVE
    epsilon: object = 1e-3
    topological: bool = False
    max_iterations: int = kernels.DEFAULT_MAX_ITERATIONS
    threads: int = 1


def _is_exact(method: str, backend: str) -> bool:
    return method == "lu-exact" or (method == "lu" and backend == RATIONAL)


def _validate(req: EvtRequest) -> None:
    if req.method not in METHODS:
        raise EvtkitError(f"unknown method {req.method!r}")
    if req.criterion not in kernels.CRITERIA:
        raise EvtkitError(f"unknown criterion {req.criterion!r}")
    if req.method == "lu-exact" and req.chain.backend != RATIONAL:
        raise EvtkitError("lu-exact requires the rational backend")
    exact = _is_exact(req.method, req.chain.backend)
    eps = req.epsilon
    if eps is None:
        eps = 0
    if not exact and not eps > 0:
        raise EvtkitError("epsilon = 0 requires an exact method")
    if req.topological and req.criterion == kernels.RELATIVE and not eps < 1:
        raise EvtkitError("relative topological computation requires epsilon < 1")
    if eps < 0:
        raise EvtkitError("epsilon must be non-negative")


def compute_evts(req: EvtRequest) -> AnalysisResult:
    """Expected visiting times of every state under the requested solver."""
    _validate(req)
    chain = req.chain
    if chain.is_ctmc:
        return _ctmc_reduction(req)
    if req.topological:
        if req.criterion == kernels.RELATIVE:
            return topological_evts_relative(
                chain, req.method, req.epsilon,
                max_iterations=req.max_iterations, threads=req.threads)
        return topological_evts_absolute(
            chain, req.method, req.epsilon,
            max_iterations=req.max_iterations, threads=req.threads)
    return _plain_evts(req)


def _ctmc_reduction(req: EvtRequest) -> AnalysisResult:
    """Solve on the embedded chain, then weight by expected residence times.

    Dividing by a rate below 1 inflates absolute errors, so the embedded
    run tightens the absolute threshold by the smallest rate; relative
    errors are invariant under the exact per-state scaling.
    """
    chain = req.chain
    inner_eps = req.epsilon
    exact = _is_exact(req.method, chain.backend)
    if req.criterion == kernels.ABSOLUTE and not exact:
        min_rate = min(chain.rates)
        if min_rate < 1:
            inner_eps = req.epsilon * min_rate
    embedded = embed(chain)
    inner = compute_evts(EvtRequest(
        chain=embedded, method=req.method, criterion=req.criterion,
        epsilon=inner_eps, topological=req.topological,
        max_iterations=req.max_iterations, threads=req.threads))
    values = [
        v if v == INF else v / r for v, r in zip(inner.values, chain.rates)
    ]
    certified = inner.certified_bound
    if certified is not None and not exact:
        certified = req.epsilon
    lower = upper = None
    if inner.lower_values is not None:
        lower = [v if v == INF else v / r
                 for v, r in zip(inner.lower_values, chain.rates)]
        upper = [v if v == INF else v / r
                 for v, r in zip(inner.upper_values, chain.rates)]
    return AnalysisResult(
        values=values, method=req.method, criterion=req.criterion,
        epsilon=req.epsilon, certified_bound=certified,
        iterations=inner.iterations, backend=chain.backend,
        names=list(chain.names), topological=req.topological,
        lower_values=lower, upper_values=upper)


def _plain_evts(req: EvtRequest) -> AnalysisResult:
    chain = req.chain
    dec = decompose(chain)
    active = [s for s in dec.transient_states if dec.reachable[s]]
    sys = system_for_states(chain, active)
    x, iterations, low, up = _run_kernel(
        sys, chain, dec, active, req.method, req.criterion, req.epsilon,
        req.max_iterations)
    values = assemble_values(chain, dec, active, x)
    certified = _certificate(req.method, chain.backend, req.epsilon)
    lower = upper = None
    if low is not None:
        lower = assemble_values(chain, dec, active, low)
        upper = assemble_values(chain, dec, active, up)
    return AnalysisResult(
        values=values, method=req.method, criterion=req.criterion,
        epsilon=req.epsilon, certified_bound=certified, iterations=iterations,
        backend=chain.backend, names=list(chain.names),
        lower_values=lower, upper_values=upper)


def _certificate(method: str, backend: str, epsilon):
    if method in SOUND_ITERATIVE:
        return epsilon
    if _is_exact(method, backend):
        return zero(backend)
    return None


def system_for_states(chain: MarkovChain, active: list, tau=None) -> EvtSystem:
    """Incoming-oriented system over the given states: contribution of x[t]
    to component s is P(state_t, state_s)."""
    pos = {s: i for i, s in enumerate(active)}
    rows = []
    for s in active:
        rows.append([
            (pos[t], p) for t, p in chain.incoming(s) if t in pos and p != 0
        ])
    if tau is None:
        tau = [chain.init[s] for s in active]
    return EvtSystem(rows, tau, chain.backend)


def assemble_values(chain: MarkovChain, dec: SccDecomposition, active: list, x):
    """Scatter solved transient values into the full state vector."""
    values = [zero(chain.backend)] * chain.n
    for s in range(chain.n):
        if dec.reachable[s] and not dec.is_transient(s):
            values[s] = INF
    for i, s in enumerate(active):
        values[s] = x[i]
    return values


def _run_kernel(sys, chain, dec, active, method, criterion, epsilon,
                max_iterations, restriction=None):
    """Dispatch one system solve; returns (x, iterations, lower, upper)."""
    if sys.n == 0:
        empty = kernels._copy([], chain.backend)
        return empty, 0, None, None
    if method in ("lu", "lu-exact"):
        return kernels.direct_solve(sys), 0, None, None
    if method in ("vi", "gs-vi"):
        x0 = kernels._copy([zero(chain.backend)] * sys.n, chain.backend)
        run = (kernels.value_iteration if method == "vi"
               else kernels.gauss_seidel_value_iteration)
        out = run(sys, x0, criterion, epsilon, max_iterations)
        return out.x, out.iterations, None, None
    bounds = initial_ii_bounds(chain, dec, criterion, epsilon,
                               restriction=restriction,
                               active=active if restriction is None else None)
    run = (kernels.interval_iteration if method == "ii"
           else kernels.gauss_seidel_interval_iteration)
    out = run(sys, bounds, max_iterations)
    return out.x, out.iterations, out.lower, out.upper


def topological_evts_relative(chain: MarkovChain, inner_method: str, epsilon,
                              *, max_iterations=kernels.DEFAULT_MAX_ITERATIONS,
                              threads: int = 1) -> AnalysisResult:
    """SCC-by-SCC computation with a relative-error budget.

    Each non-bottom SCC is solved on its restriction to per-SCC relative
    precision delta = (1 + eps)^(1/(L+1)) - 1, which composes along the
    longest non-bottom chain to a final relative error of at most eps.
    With an exact inner solver eps = 0 reproduces the exact values.
    """
    if chain.is_ctmc:
        return compute_evts(EvtRequest(chain, inner_method, kernels.RELATIVE,
                                       epsilon, topological=True,
                                       max_iterations=max_iterations,
                                       threads=threads))
    eps = float(epsilon)
    if not 0 <= eps < 1:
        raise EvtkitError("relative topological computation requires epsilon in [0, 1)")
    exact = _is_exact(inner_method, chain.backend)
    if eps == 0 and not exact:
        raise EvtkitError("epsilon = 0 requires an exact method")
    dec = decompose(chain)
    if eps == 0:
        delta = 0
    else:
        delta = ((1.0 + eps) ** (1.0 / (dec.longest_chain + 1)) - 1.0)
        delta *= 1.0 - 1e-12  # shave so the composed budget stays below eps
    x, iterations = _run_topological(
        chain, dec, inner_method, kernels.RELATIVE, delta, max_iterations,
        threads)
    values = _scatter_topological(chain, dec, x)
    certified = _certificate(inner_method, chain.backend, epsilon)
    if certified is not None and not exact:
        certified = epsilon
    return AnalysisResult(
        values=values, method=inner_method, criterion=kernels.RELATIVE,
        epsilon=epsilon, certified_bound=certified, iterations=iterations,
        backend=chain.backend, names=list(chain.names), topological=True)


def topological_evts_absolute(chain: MarkovChain, inner_method: str, epsilon,
                              *, max_iterations=kernels.DEFAULT_MAX_ITERATIONS,
                              threads: int = 1) -> AnalysisResult:
    """SCC-by-SCC computation with an absolute-error budget.

    The per-SCC threshold sigma = eps / (1 + (1/q) * sum_{i=1..L} T^i)
    compensates the worst-case amplification through inflow mass (T incoming
    transitions per SCC), recurrence (never-return bound q), and chain depth
    (L non-bottom SCC levels).
    """
    if chain.is_ctmc:
        return compute_evts(EvtRequest(chain, inner_method, kernels.ABSOLUTE,
                                       epsilon, topological=True,
                                       max_iterations=max_iterations,
                                       threads=threads))
    exact = _is_exact(inner_method, chain.backend)
    if not (epsilon is not None and (epsilon > 0 or (epsilon == 0 and exact))):
        raise EvtkitError("absolute topological computation requires epsilon > 0")
    dec = decompose(chain)
    sigma = _absolute_threshold(chain, dec, epsilon, exact)
    x, iterations = _run_topological(
        chain, dec, inner_method, kernels.ABSOLUTE, sigma, max_iterations,
        threads)
    values = _scatter_topological(chain, dec, x)
    certified = _certificate(inner_method, chain.backend, epsilon)
    if certified is not None and not exact:
        certified = epsilon
    return AnalysisResult(
        values=values, method=inner_method, criterion=kernels.ABSOLUTE,
        epsilon=epsilon, certified_bound=certified, iterations=iterations,
        backend=chain.backend, names=list(chain.names), topological=True)


def _absolute_threshold(chain, dec, epsilon, exact):
    if epsilon == 0:
        return 0
    if not dec.non_bottom_sccs:
        return epsilon
    q = global_escape_minimum(chain, dec)
    big_t = dec.max_incoming
    length = dec.longest_chain
    amplification = sum(big_t ** i for i in range(1, length + 1))
    if chain.backend == RATIONAL:
        return Fraction(epsilon) / (1 + Fraction(amplification) / Fraction(q))
    try:
        sigma = float(epsilon) / (1.0 + amplification / q)
    except OverflowError:
        sigma = 0.0
    if sigma <= 0 or not math.isfinite(sigma):
        raise SolverError(
            "absolute per-SCC threshold underflows to 0; "
            "use the relative criterion or the rational backend")
    return sigma


def _scatter_topological(chain, dec, x):
    values = [zero(chain.backend)] * chain.n
    for s in range(chain.n):
        if dec.is_transient(s):
            values[s] = x[s]
        elif dec.reachable[s]:
            values[s] = INF
    return values


def _run_topological(chain, dec, inner_method, criterion, threshold,
                     max_iterations, threads):
    """Process non-bottom SCCs in topological order, sharing the growing
    value vector; incomparable SCCs may run on worker threads.

    Workers only compute; the main thread writes results back and schedules
    successors, so an SCC never starts before its inflow values are final
    and results do not depend on scheduling order.
    """
    x = [zero(chain.backend)] * chain.n
    iterations = 0

    def solve_one(c):
        return _solve_scc(chain, dec, c, x, inner_method, criterion,
                          threshold, max_iterations)

    order = dec.non_bottom_sccs
    if threads <= 1 or len(order) <= 1:
        for c in order:
            states, values, iters = solve_one(c)
            for s, v in zip(states, values):
                x[s] = v
            iterations += iters
        return x, iterations

    non_bottom = set(order)
    successors = {c: set() for c in order}
    indegree = {c: 0 for c in order}
    for s in dec.transient_states:
        c = dec.scc_of[s]
        for t, p in chain.rows[s]:
            c2 = dec.scc_of[t]
            if p != 0 and c2 != c and c2 in non_bottom:
                if c2 not in successors[c]:
                    successors[c].add(c2)
                    indegree[c2] += 1
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {}
        for c in order:
            if indegree[c] == 0:
                futures[pool.submit(solve_one, c)] = c
        while futures:
            finished, _ = futures_wait(futures, return_when=FIRST_COMPLETED)
            for fut in finished:
                c = futures.pop(fut)
                states, values, iters = fut.result()
                for s, v in zip(states, values):
                    x[s] = v
                iterations += iters
                for c2 in sorted(successors[c]):
                    indegree[c2] -= 1
                    if indegree[c2] == 0:
                        futures[pool.submit(solve_one, c2)] = c2
    return x, iterations


def _solve_scc(chain, dec, c, x, inner_method, criterion, threshold,
               max_iterations):
    restriction = build_restriction(chain, dec, c, x)
    states = restriction.states
    backend = chain.backend
    if restriction.mass == 0:
        return states, [zero(backend)] * len(states), 0
    if restriction.size == 1 and not restriction.has_self_loop(0):
        # acyclic singleton: the visiting time is exactly the inflow
        return states, [restriction.initial_values[0]], 0
    rows_in = [[] for _ in states]
    for i, row in enumerate(restriction.local_rows):
        for j, p in row:
            if p != 0:
                rows_in[j].append((i, p))
    sys = EvtSystem(rows_in, restriction.initial_values, backend)
    if _is_exact(inner_method, backend) or inner_method == "lu":
        return states, list(kernels.direct_solve(sys)), 0
    if threshold == 0:
        raise EvtkitError("epsilon = 0 requires an exact method")
    xs, iters, _, _ = _run_kernel(
        sys, chain, dec, None, inner_method, criterion, threshold,
        max_iterations, restriction=restriction)
    return states, list(xs), iters
