"""Deterministic weighted finite automata over the probability semiring.

Weights live in (R+ u {+inf}, +, x, 0, 1): a path's weight is the product
of its transition weights times the final weight of its endpoint, and a
string's weight is the weight of its unique accepting path (automata here
are deterministic, so there is at most one).

A :class:`Wfa` is immutable after construction and safe to share across
threads; every operation in this module is a pure function returning a
new automaton or a plain value.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

__all__ = [
    "Transition",
    "Wfa",
    "CyclicAutomatonError",
    "default_alphabet",
    "evaluate",
    "intersect",
    "power_weights",
    "topological_order",
    "state_levels",
    "backward_distances",
    "weight_push",
    "count_accepting_paths",
    "enumerate_support",
    "leveled_best_path",
    "validate",
]


class CyclicAutomatonError(ValueError):
    """Raised by operations that require an acyclic automaton."""


@dataclass(frozen=True)
class Transition:
    src: int
    label: str
    weight: float
    dst: int


def default_alphabet(n: int) -> tuple[str, ...]:
    """Symbols 'a'..'z' for small n, 'e0','e1',... beyond that."""
    if n < 1:
        raise ValueError("alphabet needs at least one symbol")
    if n <= 26:
        return tuple(chr(ord("a") + i) for i in range(n))
    return tuple(f"e{i}" for i in range(n))


class Wfa:
    """A deterministic WFA.

    Construction checks structural integrity (state ids in range, labels
    drawn from the alphabet, a single initial state).  The semantic
    invariants, determinism and non-negative weights, are what
    :func:`validate` reports on, so a broken machine can still be built
    and diagnosed.  All builders in this package emit valid machines.
    ``state_names`` is optional provenance kept for debugging
    (intersection stores the originating state pairs there).
    """

    __slots__ = ("alphabet", "num_states", "initial", "finals", "transitions",
                 "state_names", "_out")

    def __init__(self, alphabet: Sequence[str], num_states: int, initial: int,
                 finals: dict[int, float], transitions: Iterable[Transition],
                 state_names: Optional[Sequence] = None):
        self.alphabet = tuple(alphabet)
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("duplicate symbols in alphabet")
        self.num_states = num_states
        if not (0 <= initial < num_states):
            raise ValueError("initial state out of range")
        self.initial = initial
        self.finals = dict(finals)
        for q in self.finals:
            if not (0 <= q < num_states):
                raise ValueError(f"final state {q} out of range")
        self.transitions = tuple(transitions)
        symbols = set(self.alphabet)
        out: list[dict[str, Transition]] = [dict() for _ in range(num_states)]
        for t in self.transitions:
            if not (0 <= t.src < num_states and 0 <= t.dst < num_states):
                raise ValueError(f"transition {t} out of range")
            if t.label not in symbols:
                raise ValueError(f"unknown symbol {t.label!r}")
            # First transition wins in the index; validate() flags duplicates.
            out[t.src].setdefault(t.label, t)
        self._out = tuple(out)
        self.state_names = tuple(state_names) if state_names is not None else None

    # -- queries ----------------------------------------------------------

    def arcs(self, state: int) -> dict[str, Transition]:
        """Outgoing transitions of ``state`` keyed by label."""
        return self._out[state]

    def final_weight(self, state: int) -> float:
        return self.finals.get(state, 0.0)

    def is_final(self, state: int) -> bool:
        return state in self.finals

    def __repr__(self) -> str:
        return (f"Wfa(states={self.num_states}, transitions={len(self.transitions)}, "
                f"finals={len(self.finals)}, alphabet={self.alphabet})")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]],
                       alphabet: Optional[Sequence[str]] = None,
                       weight: float = 1.0) -> "Wfa":
        """Trie acceptor assigning ``weight`` to each listed sequence.

        Handy for building small test machines from an explicit support.
        """
        seqs = [tuple(s) for s in sequences]
        if alphabet is None:
            alphabet = sorted({a for s in seqs for a in s})
        next_id = 1
        children: dict[tuple[int, str], int] = {}
        finals: dict[int, float] = {}
        transitions = []
        for s in seqs:
            q = 0
            for a in s:
                key = (q, a)
                if key not in children:
                    children[key] = next_id
                    transitions.append(Transition(q, a, 1.0, next_id))
                    next_id += 1
                q = children[key]
            finals[q] = weight
        return cls(alphabet, next_id, 0, finals, transitions)


# -- evaluation ------------------------------------------------------------


def evaluate(wfa: Wfa, sequence: Sequence[str]) -> float:
    """Weight assigned to ``sequence``; 0 when no accepting path exists."""
    q = wfa.initial
    w = 1.0
    for a in sequence:
        t = wfa.arcs(q).get(a)
        if t is None:
            return 0.0
        w *= t.weight
        q = t.dst
    return w * wfa.final_weight(q)


# -- intersection -----------------------------------------------------------


def intersect(a1: Wfa, a2: Wfa) -> Wfa:
    """Product automaton: (a1 & a2)(x) = a1(x) * a2(x) for every x.

    States are pairs of states reachable in both machines; transitions
    pair equal labels and multiply weights.  Only accessible and
    co-accessible pairs are kept, so the result is trim.
    """
    if a1.alphabet != a2.alphabet:
        raise ValueError("alphabet mismatch in intersection")
    start = (a1.initial, a2.initial)
    ids: dict[tuple[int, int], int] = {start: 0}
    order = [start]
    edges: list[tuple[int, str, float, int]] = []
    queue = deque([start])
    while queue:
        q1, q2 = queue.popleft()
        src = ids[(q1, q2)]
        arcs2 = a2.arcs(q2)
        for label in sorted(a1.arcs(q1)):
            t1 = a1.arcs(q1)[label]
            t2 = arcs2.get(label)
            if t2 is None:
                continue
            pair = (t1.dst, t2.dst)
            if pair not in ids:
                ids[pair] = len(order)
                order.append(pair)
                queue.append(pair)
            edges.append((src, label, t1.weight * t2.weight, ids[pair]))

    finals = {}
    for pair, q in ids.items():
        w = a1.final_weight(pair[0]) * a2.final_weight(pair[1])
        if pair[0] in a1.finals and pair[1] in a2.finals:
            finals[q] = w

    # Keep only co-accessible states.
    rev: dict[int, list[int]] = {}
    for src, _, _, dst in edges:
        rev.setdefault(dst, []).append(src)
    alive = set(finals)
    stack = list(finals)
    while stack:
        q = stack.pop()
        for p in rev.get(q, ()):
            if p not in alive:
                alive.add(p)
                stack.append(p)
    if 0 not in alive:
        return Wfa(a1.alphabet, 1, 0, {}, [], state_names=[start])
    remap = {}
    names = []
    for pair, q in ids.items():
        if q in alive:
            remap[q] = len(remap)
            names.append(pair)
    kept = [Transition(remap[s], lab, w, remap[d])
            for s, lab, w, d in edges if s in alive and d in alive]
    new_finals = {remap[q]: w for q, w in finals.items()}
    return Wfa(a1.alphabet, len(remap), remap[0], new_finals, kept, state_names=names)


# -- reweighting ------------------------------------------------------------


def power_weights(wfa: Wfa, eta: float) -> Wfa:
    """Raise every transition and final weight to the power ``eta``.

    On a deterministic machine this maps string weights w to w**eta.
    """
    if eta <= 0:
        raise ValueError("exponent must be positive")
    if eta == 1.0:
        return wfa
    ts = [Transition(t.src, t.label, t.weight ** eta, t.dst) for t in wfa.transitions]
    finals = {q: w ** eta for q, w in wfa.finals.items()}
    return Wfa(wfa.alphabet, wfa.num_states, wfa.initial, finals, ts, wfa.state_names)


# -- graph structure ---------------------------------------------------------


def topological_order(wfa: Wfa) -> list[int]:
    """States in topological order; raises CyclicAutomatonError on cycles."""
    indeg = [0] * wfa.num_states
    for t in wfa.transitions:
        indeg[t.dst] += 1
    queue = deque(q for q in range(wfa.num_states) if indeg[q] == 0)
    order = []
    while queue:
        q = queue.popleft()
        order.append(q)
        for t in wfa.arcs(q).values():
            indeg[t.dst] -= 1
            if indeg[t.dst] == 0:
                queue.append(t.dst)
    if len(order) != wfa.num_states:
        raise CyclicAutomatonError("automaton contains a cycle")
    return order


def state_levels(wfa: Wfa) -> list[Optional[int]]:
    """Distance from the initial state when it is unique per state.

    Machines intersected with a fixed-length acceptor are leveled: every
    path reaching a state has the same length.  Raises ValueError when
    two paths of different lengths reach the same state; unreachable
    states get level ``None``.
    """
    levels: list[Optional[int]] = [None] * wfa.num_states
    levels[wfa.initial] = 0
    for q in topological_order(wfa):
        if levels[q] is None:
            continue
        for t in wfa.arcs(q).values():
            expected = levels[q] + 1
            if levels[t.dst] is None:
                levels[t.dst] = expected
            elif levels[t.dst] != expected:
                raise ValueError("automaton is not leveled")
    return levels


# -- path aggregation ---------------------------------------------------------


def backward_distances(wfa: Wfa) -> dict[int, float]:
    """Sum of path weights from each state to the final states.

    One reverse-topological pass; requires an acyclic machine.
    """
    order = topological_order(wfa)
    d = {q: 0.0 for q in range(wfa.num_states)}
    for q in reversed(order):
        total = wfa.final_weight(q) if q in wfa.finals else 0.0
        for t in wfa.arcs(q).values():
            total += t.weight * d[t.dst]
        d[q] = total
    return d


def weight_push(wfa: Wfa) -> Wfa:
    """Reweight so outgoing weights plus final weight sum to 1 per state.

    Transition weights become d[src]^-1 * w * d[dst] and final weights
    d[q]^-1 * rho[q], where d is the backward distance table.  Path
    weights are preserved up to the global factor d[initial] (exactly
    preserved when d[initial] == 1).  Dead states (d == 0) are dropped;
    an empty language is an error.
    """
    d = backward_distances(wfa)
    if d[wfa.initial] == 0.0:
        raise ValueError("weight pushing needs a non-empty language")
    alive = [q for q in range(wfa.num_states) if d[q] > 0.0]
    # Forward-reachability prune as well, to keep the machine trim.
    reach = {wfa.initial}
    stack = [wfa.initial]
    while stack:
        q = stack.pop()
        for t in wfa.arcs(q).values():
            if d[t.dst] > 0.0 and t.dst not in reach:
                reach.add(t.dst)
                stack.append(t.dst)
    keep = [q for q in alive if q in reach]
    remap = {q: i for i, q in enumerate(keep)}
    ts = []
    for t in wfa.transitions:
        if t.src in remap and t.dst in remap and t.weight > 0.0:
            ts.append(Transition(remap[t.src], t.label,
                                 t.weight * d[t.dst] / d[t.src], remap[t.dst]))
    finals = {remap[q]: w / d[q] for q, w in wfa.finals.items() if q in remap}
    names = None
    if wfa.state_names is not None:
        names = [wfa.state_names[q] for q in keep]
    return Wfa(wfa.alphabet, len(keep), remap[wfa.initial], finals, ts, names)


def count_accepting_paths(wfa: Wfa) -> int:
    """Number of accepting paths with strictly positive weight."""
    order = topological_order(wfa)
    counts = [0] * wfa.num_states
    for q in reversed(order):
        c = 1 if wfa.final_weight(q) > 0.0 else 0
        for t in wfa.arcs(q).values():
            if t.weight > 0.0:
                c += counts[t.dst]
        counts[q] = c
    return counts[wfa.initial]


def enumerate_support(wfa: Wfa, limit: int = 100_000) -> list[tuple[tuple[str, ...], float]]:
    """Exhaustive list of (sequence, weight) pairs with positive weight.

    DFS over the acyclic machine; raises ValueError past ``limit`` paths.
    Used as the brute-force oracle throughout the test-suite.
    """
    topological_order(wfa)  # acyclicity check
    out: list[tuple[tuple[str, ...], float]] = []

    def rec(q: int, prefix: list[str], w: float):
        fw = wfa.final_weight(q)
        if fw > 0.0:
            if len(out) >= limit:
                raise ValueError(f"support larger than limit={limit}")
            out.append((tuple(prefix), w * fw))
        for label in sorted(wfa.arcs(q)):
            t = wfa.arcs(q)[label]
            if t.weight > 0.0:
                prefix.append(label)
                rec(t.dst, prefix, w * t.weight)
                prefix.pop()

    rec(wfa.initial, [], 1.0)
    return out


def leveled_best_path(wfa: Wfa,
                      score: Callable[[Transition, int], float],
                      final_score: Optional[Callable[[int], float]] = None,
                      maximize: bool = True) -> tuple[float, tuple[str, ...]]:
    """Best accepting path of a leveled acyclic machine under additive scores.

    ``score(t, level)`` is the contribution of transition ``t`` taken at
    depth ``level`` (0-based: the transition consuming the first symbol
    has level 0); ``final_score(q)`` is added at accepting endpoints.
    Ties are broken toward the lexicographically smallest label sequence.
    Returns (total score, label sequence).
    """
    levels = state_levels(wfa)
    order = topological_order(wfa)
    sign = 1.0 if maximize else -1.0
    best: dict[int, tuple[float, tuple[str, ...]]] = {wfa.initial: (0.0, ())}
    for q in order:
        if q not in best:
            continue
        base, seq = best[q]
        for label in sorted(wfa.arcs(q)):
            t = wfa.arcs(q)[label]
            if t.weight <= 0.0:
                continue
            val = base + sign * score(t, levels[q])
            cand = (val, seq + (label,))
            cur = best.get(t.dst)
            if cur is None or val > cur[0] or (val == cur[0] and cand[1] < cur[1]):
                best[t.dst] = cand
    result: Optional[tuple[float, tuple[str, ...]]] = None
    for q, fw in wfa.finals.items():
        if fw <= 0.0 or q not in best:
            continue
        val, seq = best[q]
        if final_score is not None:
            val += sign * final_score(q)
        if result is None or val > result[0] or (val == result[0] and seq < result[1]):
            result = (val, seq)
    if result is None:
        raise ValueError("no accepting path")
    return (sign * result[0], result[1])


# -- diagnostics --------------------------------------------------------------


@dataclass
class Diagnostics:
    ok: bool
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def validate(wfa: Wfa) -> Diagnostics:
    """Report-only structural check: determinism, weights, reachability."""
    errors: list[str] = []
    warnings: list[str] = []
    seen: set[tuple[int, str]] = set()
    for t in wfa.transitions:
        if (t.src, t.label) in seen:
            errors.append(f"two {t.label!r}-transitions leave state {t.src}")
        seen.add((t.src, t.label))
        if t.weight < 0:
            errors.append(f"negative weight on {t}")
    for q, w in wfa.finals.items():
        if w < 0:
            errors.append(f"negative final weight at state {q}")
    reach = {wfa.initial}
    stack = [wfa.initial]
    while stack:
        q = stack.pop()
        for t in wfa.arcs(q).values():
            if t.dst not in reach:
                reach.add(t.dst)
                stack.append(t.dst)
    for q in range(wfa.num_states):
        if q not in reach:
            warnings.append(f"state {q} unreachable from initial")
    if not wfa.finals:
        warnings.append("no final states")
    return Diagnostics(ok=not errors, errors=errors, warnings=warnings)
