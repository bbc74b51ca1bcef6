"""Markov chain data types, validation, and the explicit text model format.

The model format is UTF-8 with ``#`` comments and whitespace-separated
tokens, organized in sections::

    @type dtmc            # or: ctmc
    @states 7             # optional explicit identifier list on following lines
    @initial
    s1 0.4
    s3 0.6
    @transitions
    s1 s2 0.5
    s1 s4 1/2
    @rates                # ctmc only, one "state rate" line per state
    @reward <name>        # optional, repeatable; "state value" lines, omitted = 0

Probabilities are decimal literals or ``num/den`` fractions.  The rational
backend parses both exactly; the float backend rounds to nearest and
renormalizes rows whose defect stays below ``ROW_SUM_TOLERANCE``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ModelError
from .scalars import (
    BACKENDS,
    FLOAT,
    RATIONAL,
    ROW_SUM_TOLERANCE,
    format_value,
    parse_value,
)


@dataclass
class MarkovChain:
    """Sparse row-stochastic chain with initial distribution and optional
    exit rates (present iff continuous-time) and named reward structures.

    ``rows[s]`` lists ``(target, probability)`` sorted by target.  Instances
    are treated as immutable after construction; all derived structure is
    cached lazily.
    """

    names: list[str]
    backend: str
    rows: list[list[tuple]]
    init: list
    rates: list | None = None
    rewards: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {name: i for i, name in enumerate(self.names)}
        self._incoming = None
        if len(self._index) != len(self.names):
            raise ModelError("duplicate state identifiers")

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def is_ctmc(self) -> bool:
        return self.rates is not None

    def state_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown state {name!r}") from None

    def incoming(self, s: int) -> list:
        """Predecessor edges ``(t, P(t, s))`` of state ``s``."""
        if self._incoming is None:
            inc = [[] for _ in range(self.n)]
            for t, row in enumerate(self.rows):
                for s2, p in row:
                    inc[s2].append((t, p))
            self._incoming = inc
        return self._incoming[s]

    def probability(self, s: int, t: int):
        for col, p in self.rows[s]:
            if col == t:
                return p
        return None

    def to_float(self) -> "MarkovChain":
        """Same chain with every scalar converted to binary64."""
        if self.backend == FLOAT:
            return self
        conv = float
        return MarkovChain(
            names=list(self.names),
            backend=FLOAT,
            rows=[[(t, conv(p)) for t, p in row] for row in self.rows],
            init=[conv(v) for v in self.init],
            rates=None if self.rates is None else [conv(r) for r in self.rates],
            rewards={k: [conv(v) for v in vec] for k, vec in self.rewards.items()},
        )


def validate_chain(chain: MarkovChain) -> MarkovChain:
    """Check the structural invariants; renormalize float rows within tolerance."""
    if chain.backend not in BACKENDS:
        raise ModelError(f"unknown backend {chain.backend!r}")
    n = chain.n
    if n == 0:
        raise ModelError("chain has no states")
    if len(chain.rows) != n or len(chain.init) != n:
        raise ModelError("row/init length does not match state count")
    for s in range(n):
        chain.rows[s] = _validated_row(chain, s)
    chain.init[:] = _validated_distribution(
        chain.init, chain.backend, what="initial distribution"
    )
    if chain.rates is not None:
        if len(chain.rates) != n:
            raise ModelError("rate vector length does not match state count")
        for s, r in enumerate(chain.rates):
            if not r > 0 or (chain.backend == FLOAT and not math.isfinite(r)):
                raise ModelError(f"exit rate of state {chain.names[s]!r} must be positive")
    for name, vec in chain.rewards.items():
        if len(vec) != n:
            raise ModelError(f"reward structure {name!r} length mismatch")
        for s, v in enumerate(vec):
            if v < 0 or (chain.backend == FLOAT and not math.isfinite(v)):
                raise ModelError(
                    f"reward {name!r} of state {chain.names[s]!r} must be non-negative and finite"
                )
    return chain


def _validated_row(chain: MarkovChain, s: int) -> list:
    row = sorted(chain.rows[s])
    seen = set()
    for t, p in row:
        if t in seen:
            raise ModelError(f"duplicate transition entry for state {chain.names[s]!r}")
        seen.add(t)
        if p < 0 or p > 1:
            raise ModelError(
                f"probability {format_value(p)} of {chain.names[s]!r} out of [0, 1]"
            )
    total = sum(p for _, p in row)
    if chain.backend == RATIONAL:
        if total != 1:
            raise ModelError(
                f"row of state {chain.names[s]!r} sums to {format_value(total)}, expected 1"
            )
        return row
    if abs(total - 1.0) > ROW_SUM_TOLERANCE:
        raise ModelError(
            f"row of state {chain.names[s]!r} sums to {total!r}, expected 1"
        )
    if total != 1.0:
        row = [(t, p / total) for t, p in row]
    return row


def _validated_distribution(values: list, backend: str, what: str) -> list:
    for v in values:
        if v < 0 or v > 1:
            raise ModelError(f"{what} entry {format_value(v)} out of [0, 1]")
    total = sum(values)
    if backend == RATIONAL:
        if total != 1:
            raise ModelError(f"{what} sums to {format_value(total)}, expected 1")
        return values
    if abs(total - 1.0) > ROW_SUM_TOLERANCE:
        raise ModelError(f"{what} sums to {total!r}, expected 1")
    if total != 1.0:
        values = [v / total for v in values]
    return values


_SECTIONS = ("@type", "@states", "@initial", "@transitions", "@rates", "@reward")


def parse_model(text: str, backend: str = FLOAT) -> MarkovChain:
    """Parse a model document into a validated chain.

    States are indexed 0..n-1 in declaration order: the explicit list after
    ``@states`` when given, first use otherwise.  Omitted initial entries
    default to 0.
    """
    if backend not in BACKENDS:
        raise ModelError(f"unknown backend {backend!r}")

    names: list[str] = []
    index: dict[str, int] = {}
    explicit_states = False
    declared_count = None
    chain_type = None
    init_entries: dict[int, object] = {}
    transitions: dict[int, list] = {}
    rate_entries: dict[int, object] = {}
    rewards: dict[str, dict[int, object]] = {}
    section = None
    current_reward = None
    saw_rates_section = False

    def lookup(token: str, line: int) -> int:
        if token in index:
            return index[token]
        if explicit_states:
            raise ModelError(f"unknown state {token!r}", line)
        if token.startswith("@"):
            raise ModelError(f"bad state identifier {token!r}", line)
        index[token] = len(names)
        names.append(token)
        return index[token]

    def number(token: str, line: int):
        try:
            return parse_value(token, backend)
        except ValueError as exc:
            raise ModelError(str(exc), line)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]

        if head.startswith("@"):
            if head not in _SECTIONS:
                raise ModelError(f"unknown section {head!r}", lineno)
            if head == "@type":
                if len(tokens) != 2 or tokens[1] not in ("dtmc", "ctmc"):
                    raise ModelError("expected '@type dtmc' or '@type ctmc'", lineno)
                if chain_type is not None:
                    raise ModelError("duplicate @type section", lineno)
                chain_type = tokens[1]
            elif head == "@states":
                if len(tokens) != 2:
                    raise ModelError("expected '@states <count>'", lineno)
                try:
                    declared_count = int(tokens[1])
                except ValueError:
                    raise ModelError(f"bad state count {tokens[1]!r}", lineno)
                if declared_count < 1:
                    raise ModelError("state count must be at least 1", lineno)
            elif head == "@reward":
                if len(tokens) != 2:
                    raise ModelError("expected '@reward <name>'", lineno)
                current_reward = tokens[1]
                if current_reward in rewards:
                    raise ModelError(f"duplicate reward structure {current_reward!r}", lineno)
                rewards[current_reward] = {}
            elif head == "@rates":
                saw_rates_section = True
            section = head
            continue

        if section == "@states":
            # identifier list, any number per line
            if index and not explicit_states:
                raise ModelError("state list must precede implicit declarations", lineno)
            explicit_states = True
            for token in tokens:
                if token in index:
                    raise ModelError(f"duplicate state identifier {token!r}", lineno)
                if token.startswith("@"):
                    raise ModelError(f"bad state identifier {token!r}", lineno)
                index[token] = len(names)
                names.append(token)
        elif section == "@initial":
            if len(tokens) != 2:
                raise ModelError("expected '<state> <probability>'", lineno)
            s = lookup(tokens[0], lineno)
            if s in init_entries:
                raise ModelError(f"duplicate initial entry for {tokens[0]!r}", lineno)
            init_entries[s] = number(tokens[1], lineno)
        elif section == "@transitions":
            if len(tokens) != 3:
                raise ModelError("expected '<source> <target> <probability>'", lineno)
            s = lookup(tokens[0], lineno)
            t = lookup(tokens[1], lineno)
            p = number(tokens[2], lineno)
            row = transitions.setdefault(s, [])
            if any(t == t2 for t2, _ in row):
                raise ModelError(
                    f"duplicate transition entry {tokens[0]} -> {tokens[1]}", lineno
                )
            row.append((t, p))
        elif section == "@rates":
            if chain_type == "dtmc":
                raise ModelError("rate declared for a dtmc", lineno)
            if len(tokens) != 2:
                raise ModelError("expected '<state> <rate>'", lineno)
            s = lookup(tokens[0], lineno)
            if s in rate_entries:
                raise ModelError(f"duplicate rate entry for {tokens[0]!r}", lineno)
            rate_entries[s] = number(tokens[1], lineno)
        elif section == "@reward":
            if len(tokens) != 2:
                raise ModelError("expected '<state> <value>'", lineno)
            s = lookup(tokens[0], lineno)
            if s in rewards[current_reward]:
                raise ModelError(f"duplicate reward entry for {tokens[0]!r}", lineno)
            rewards[current_reward][s] = number(tokens[1], lineno)
        else:
            raise ModelError(f"content outside of any section: {line!r}", lineno)

    if chain_type is None:
        raise ModelError("missing @type section")
    n = len(names)
    if n == 0:
        raise ModelError("model declares no states")
    if declared_count is not None and declared_count != n:
        raise ModelError(f"@states declares {declared_count} states but {n} are used")

    if chain_type == "ctmc":
        if not saw_rates_section:
            raise ModelError("ctmc requires an @rates section")
        missing = [names[s] for s in range(n) if s not in rate_entries]
        if missing:
            raise ModelError(f"missing exit rate for state {missing[0]!r}")
        rates = [rate_entries[s] for s in range(n)]
    else:
        rates = None

    zero = parse_value("0", backend)
    chain = MarkovChain(
        names=names,
        backend=backend,
        rows=[sorted(transitions.get(s, [])) for s in range(n)],
        init=[init_entries.get(s, zero) for s in range(n)],
        rates=rates,
        rewards={
            name: [entries.get(s, zero) for s in range(n)]
            for name, entries in rewards.items()
        },
    )
    return validate_chain(chain)


def serialize_model(chain: MarkovChain) -> str:
    """Emit the canonical text form; parse(serialize(c)) == c in the rational backend."""
    out = [f"@type {'ctmc' if chain.is_ctmc else 'dtmc'}"]
    out.append(f"@states {chain.n}")
    out.extend(chain.names)
    out.append("@initial")
    for s, v in enumerate(chain.init):
        if v != 0:
            out.append(f"{chain.names[s]} {format_value(v)}")
    out.append("@transitions")
    for s, row in enumerate(chain.rows):
        for t, p in row:
            if p != 0:
                out.append(f"{chain.names[s]} {chain.names[t]} {format_value(p)}")
    if chain.is_ctmc:
        out.append("@rates")
        for s, r in enumerate(chain.rates):
            out.append(f"{chain.names[s]} {format_value(r)}")
    for name in sorted(chain.rewards):
        out.append(f"@reward {name}")
        for s, v in enumerate(chain.rewards[name]):
            if v != 0:
                out.append(f"{chain.names[s]} {format_value(v)}")
    return "\n".join(out) + "\n"


def embed(chain: MarkovChain) -> MarkovChain:
    """Embedded discrete-time chain of a continuous-time chain.

    Transition structure, initial distribution, and rewards are untouched;
    only the exit rates are dropped.  Visiting times of the original chain
    are the embedded ones divided by the state's exit rate.
    """
    if not chain.is_ctmc:
        raise ModelError("chain is already discrete-time")
    return MarkovChain(
        names=list(chain.names),
        backend=chain.backend,
        rows=[list(row) for row in chain.rows],
        init=list(chain.init),
        rates=None,
        rewards={k: list(v) for k, v in chain.rewards.items()},
    )


def transient_submatrix(chain: MarkovChain, scc
                        ) -> tuple[list, list, list]:
    """Split the chain at the transient/recurrent boundary.

    Returns ``(q_rows, r_rows, tau_init)`` where ``q_rows[i]`` holds the
    transient-to-transient edges of the i-th transient state (targets are
    positions in the transient list), ``r_rows[i]`` the transient-to-recurrent
    edges (targets are original state indices), and ``tau_init`` the initial
    distribution restricted to transient states.
    """
    transient = scc.transient_states
    pos = {s: i for i, s in enumerate(transient)}
    q_rows, r_rows = [], []
    for s in transient:
        q_row, r_row = [], []
        for t, p in chain.rows[s]:
            if t in pos:
                q_row.append((pos[t], p))
            else:
                r_row.append((t, p))
        q_rows.append(q_row)
        r_rows.append(r_row)
    tau = [chain.init[s] for s in transient]
    return q_rows, r_rows, tau
