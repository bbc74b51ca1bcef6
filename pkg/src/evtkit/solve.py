"""Numeric kernels for the transient visiting-time system.

Everything here revolves around the affine operator

    phi(x)(s) = tau(s) + sum_t A(s, t) * x(t)

whose unique fixed point solves (I - A) x = tau.  For visiting times A is
the transposed transient transition matrix, so the sum runs over incoming
edges.  Kernels: value iteration (fast, no guarantee), interval iteration
(sound two-sided bracketing), their Gauss-Seidel in-place variants, and
direct elimination in either backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .scalars import FLOAT, INF, RATIONAL, RELATIVE_ZERO_GUARD, zero

DEFAULT_MAX_ITERATIONS = 10_000_000

ABSOLUTE = "abs"
RELATIVE = "rel"
CRITERIA = (ABSOLUTE, RELATIVE)


class EvtSystem:
    """Sparse affine operator ``x -> tau + A x`` over the active states.

    ``rows[i]`` lists ``(j, weight)`` contributions of x[j] to component i.
    Instances are read-only and shareable between solver calls.
    """

    def __init__(self, rows: list, tau, backend: str):
        self.rows = rows
        self.backend = backend
        if backend == FLOAT:
            self.tau = np.asarray(tau, dtype=float)
        else:
            self.tau = list(tau)
        self._csr = None

    @property
    def n(self) -> int:
        return len(self.rows)

    def _matrix(self):
        if self._csr is None:
            from scipy.sparse import csr_matrix

            data, cols, indptr = [], [], [0]
            for row in self.rows:
                for j, p in row:
                    cols.append(j)
                    data.append(p)
                indptr.append(len(cols))
            self._csr = csr_matrix(
                (np.array(data, dtype=float), np.array(cols, dtype=np.int64),
                 np.array(indptr, dtype=np.int64)),
                shape=(self.n, self.n),
            )
        return self._csr

    def apply(self, x):
        if self.backend == FLOAT:
            if self.n == 0:
                return np.zeros(0)
            return self._matrix().dot(x) + self.tau
        return [
            tau_i + _dot_row(row, x) for row, tau_i in zip(self.rows, self.tau)
        ]


def _dot_row(row, x):
    acc = 0
    for j, p in row:
        acc += p * x[j]
    return acc


def apply_phi(sys: EvtSystem, x):
    """One application of the operator; checks the dimension."""
    if len(x) != sys.n:
        raise SolverError(f"vector of length {len(x)} fed to a {sys.n}-state system")
    return sys.apply(x)


def diff(criterion: str, x, y):
    """Maximal component-wise difference of x from reference y.

    ``abs``: max |x - y|.  ``rel``: max |x - y| / |y| with the conventions
    0/0 = 0 and a/0 = inf for a != 0; in the float backend a numerator below
    the underflow guard over a zero denominator also counts as 0/0.
    """
    if criterion not in CRITERIA:
        raise SolverError(f"unknown criterion {criterion!r}")
    if len(x) != len(y):
        raise SolverError("difference of vectors with mismatched lengths")
    if len(x) == 0:
        return 0.0
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = np.abs(x - y)
        if criterion == ABSOLUTE:
            return float(d.max())
        ay = np.abs(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = d / ay
        mask = ay == 0
        if mask.any():
            r[mask] = np.where(d[mask] < RELATIVE_ZERO_GUARD, 0.0, INF)
        return float(r.max())
    worst = 0
    for xi, yi in zip(x, y):
        d = abs(xi - yi)
        if criterion == ABSOLUTE:
            worst = max(worst, d)
            continue
        if yi == 0:
            if d == 0:
                continue
            return INF
        worst = max(worst, d / abs(yi))
    return worst


@dataclass
class Bounds:
    """Paired lower/upper vectors with the precision contract they certify."""

    lower: object
    upper: object
    criterion: str
    epsilon: object


@dataclass
class IterationResult:
    x: object
    iterations: int


@dataclass
class IntervalResult:
    x: object
    iterations: int
    gap: object
    lower: object
    upper: object
    trace: list | None = None


def value_iteration(sys: EvtSystem, x0, criterion: str, epsilon,
                    max_iterations: int = DEFAULT_MAX_ITERATIONS) -> IterationResult:
    """Iterate phi until two consecutive iterates are epsilon-close.

    Fast but carries NO accuracy certificate: the consecutive-difference
    stopping rule can fire arbitrarily far from the fixed point.
    """
    if not epsilon > 0:
        raise SolverError("value iteration requires epsilon > 0")
    x = _copy(x0, sys.backend)
    for k in range(1, max_iterations + 1):
        x_new = sys.apply(x)
        if diff(criterion, x, x_new) <= epsilon:
            return IterationResult(x=x_new, iterations=k)
        x = x_new
    raise SolverError(f"no convergence within {max_iterations} iterations")


def interval_iteration(sys: EvtSystem, bounds: Bounds,
                       max_iterations: int = DEFAULT_MAX_ITERATIONS,
                       collect_trace: bool = False) -> IntervalResult:
    """Monotone two-sided iteration with a certified result.

    Starting from a bracket l <= fixed point <= u, iterate
    l <- max(l, phi(l)) and u <- min(u, phi(u)) until the bracket width
    drops to 2*epsilon under the requested criterion, then return the mean,
    which is within epsilon of the fixed point.
    """
    if not bounds.epsilon > 0:
        raise SolverError("interval iteration requires epsilon > 0")
    backend = sys.backend
    l = _copy(bounds.lower, backend)
    u = _copy(bounds.upper, backend)
    _check_bracket(l, u)
    threshold = 2 * bounds.epsilon
    trace = [] if collect_trace else None
    if collect_trace:
        trace.append((0, _copy(l, backend), _copy(u, backend),
                      diff(bounds.criterion, u, l)))
    for k in range(1, max_iterations + 1):
        l = _elementwise_max(l, sys.apply(l), backend)
        u = _elementwise_min(u, sys.apply(u), backend)
        _check_bracket(l, u)
        gap = diff(bounds.criterion, u, l)
        if collect_trace:
            trace.append((k, _copy(l, backend), _copy(u, backend), gap))
        if gap <= threshold:
            return IntervalResult(
                x=_mean(l, u, backend), iterations=k, gap=gap,
                lower=l, upper=u, trace=trace,
            )
    raise SolverError(f"no convergence within {max_iterations} iterations")


def gauss_seidel_value_iteration(sys: EvtSystem, x0, criterion: str, epsilon,
                                 max_iterations: int = DEFAULT_MAX_ITERATIONS,
                                 order: list | None = None) -> IterationResult:
    """Value iteration with in-place sweeps: state i's update already uses the
    fresh values of states earlier in the sweep order."""
    if not epsilon > 0:
        raise SolverError("value iteration requires epsilon > 0")
    order = range(sys.n) if order is None else order
    x = list(x0)
    tau = sys.tau
    rows = sys.rows
    for k in range(1, max_iterations + 1):
        prev = list(x)
        for i in order:
            x[i] = tau[i] + _dot_row(rows[i], x)
        if diff(criterion, prev, x) <= epsilon:
            return IterationResult(x=_from_list(x, sys.backend), iterations=k)
    raise SolverError(f"no convergence within {max_iterations} iterations")


def gauss_seidel_interval_iteration(sys: EvtSystem, bounds: Bounds,
                                    max_iterations: int = DEFAULT_MAX_ITERATIONS,
                                    order: list | None = None) -> IntervalResult:
    """Interval iteration with in-place sweeps; each component is clamped
    against its pre-sweep value (max below, min above)."""
    if not bounds.epsilon > 0:
        raise SolverError("interval iteration requires epsilon > 0")
    order = list(range(sys.n)) if order is None else order
    l = list(bounds.lower)
    u = list(bounds.upper)
    _check_bracket(l, u)
    tau = sys.tau
    rows = sys.rows
    threshold = 2 * bounds.epsilon
    for k in range(1, max_iterations + 1):
        for i in order:
            candidate = tau[i] + _dot_row(rows[i], l)
            if candidate > l[i]:
                l[i] = candidate
        for i in order:
            candidate = tau[i] + _dot_row(rows[i], u)
            if candidate < u[i]:
                u[i] = candidate
        _check_bracket(l, u)
        gap = diff(bounds.criterion, u, l)
        if gap <= threshold:
            backend = sys.backend
            return IntervalResult(
                x=_mean(_from_list(l, backend), _from_list(u, backend), backend),
                iterations=k, gap=gap,
                lower=_from_list(l, backend), upper=_from_list(u, backend),
            )
    raise SolverError(f"no convergence within {max_iterations} iterations")


def direct_solve(sys: EvtSystem):
    """Solve (I - A) x = tau by elimination.

    Exact in the rational backend; the float backend goes through sparse LU
    with partial pivoting and carries no certificate beyond conditioning.
    """
    n = sys.n
    matrix_rows = []
    for i, row in enumerate(sys.rows):
        entries = {i: _one_like(sys.backend)}
        for j, p in row:
            entries[j] = entries.get(j, zero(sys.backend)) - p
        matrix_rows.append(list(entries.items()))
    return solve_linear(matrix_rows, sys.tau, sys.backend)


def solve_linear(matrix_rows: list, rhs, backend: str):
    """Solve M x = b for sparse M given as per-row ``(column, value)`` lists."""
    n = len(matrix_rows)
    if n == 0:
        return np.zeros(0) if backend == FLOAT else []
    if backend == FLOAT:
        from scipy.sparse import csr_matrix
        from scipy.sparse.linalg import spsolve

        data, cols, indptr = [], [], [0]
        for row in matrix_rows:
            for j, v in row:
                cols.append(j)
                data.append(v)
            indptr.append(len(cols))
        m = csr_matrix(
            (np.array(data, dtype=float), np.array(cols, dtype=np.int64),
             np.array(indptr, dtype=np.int64)),
            shape=(n, n),
        ).tocsc()
        x = spsolve(m, np.asarray(rhs, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverError("singular matrix in direct solve")
        return x
    return _solve_exact(matrix_rows, rhs)


def _solve_exact(matrix_rows: list, rhs):
    """Sparse exact Gaussian elimination over rationals.

    Rationals need no pivoting for stability, so pivots are chosen purely to
    limit fill-in: sparsest eligible column, then sparsest row within it.
    """
    n = len(matrix_rows)
    rows = [dict(row) for row in matrix_rows]
    for row in rows:
        for j in [j for j, v in row.items() if v == 0]:
            del row[j]
    b = list(rhs)
    col_rows: dict[int, set] = {c: set() for c in range(n)}
    for r, row in enumerate(rows):
        for c in row:
            col_rows[c].add(r)
    remaining_cols = set(range(n))
    order: list[tuple] = []
    for _ in range(n):
        c = min(remaining_cols, key=lambda cc: (len(col_rows[cc]), cc))
        if not col_rows[c]:
            raise SolverError("singular matrix in direct solve")
        r = min(col_rows[c], key=lambda rr: (len(rows[rr]), rr))
        pivot_row = rows[r]
        pivot = pivot_row[c]
        for cc in pivot_row:
            col_rows[cc].discard(r)
        for r2 in list(col_rows[c]):
            row2 = rows[r2]
            factor = row2.pop(c) / pivot
            col_rows[c].discard(r2)
            b[r2] = b[r2] - factor * b[r]
            for cc, vv in pivot_row.items():
                if cc == c:
                    continue
                new = row2.get(cc, 0) - factor * vv
                if new == 0:
                    if cc in row2:
                        del row2[cc]
                        col_rows[cc].discard(r2)
                else:
                    if cc not in row2:
                        col_rows[cc].add(r2)
                    row2[cc] = new
        remaining_cols.discard(c)
        order.append((r, c))
    x = [None] * n
    for r, c in reversed(order):
        row = rows[r]
        acc = b[r]
        for cc, vv in row.items():
            if cc != c:
                acc = acc - vv * x[cc]
        x[c] = acc / row[c]
    return x


def _one_like(backend: str):
    from fractions import Fraction

    return Fraction(1) if backend == RATIONAL else 1.0


def _copy(x, backend):
    if backend == FLOAT:
        return np.array(x, dtype=float)
    return list(x)


def _from_list(x, backend):
    if backend == FLOAT:
        return np.array(x, dtype=float)
    return list(x)


def _elementwise_max(a, b, backend):
    if backend == FLOAT:
        return np.maximum(a, b)
    return [ai if ai > bi else bi for ai, bi in zip(a, b)]


def _elementwise_min(a, b, backend):
    if backend == FLOAT:
        return np.minimum(a, b)
    return [ai if ai < bi else bi for ai, bi in zip(a, b)]


def _mean(a, b, backend):
    if backend == FLOAT:
        return (a + b) / 2.0
    from fractions import Fraction

    half = Fraction(1, 2)
    return [(ai + bi) * half for ai, bi in zip(a, b)]


def _check_bracket(l, u):
    if isinstance(l, np.ndarray):
        if np.any(np.asarray(l) > np.asarray(u)):
            raise SolverError("bounds inversion: lower exceeds upper, inputs unsound")
        return
    if any(ai > bi for ai, bi in zip(l, u)):
        raise SolverError("bounds inversion: lower exceeds upper, inputs unsound")
