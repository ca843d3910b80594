"""Exponential-weights prediction over automaton-encoded expert sequences.

The engine maintains, implicitly, an exponentially reweighted
distribution over all length-T expert sequences accepted by a competitor
automaton.  The machine is prepared once (intersect with the length-T
acceptor, raise weights to the learning-rate power, weight-push,
backward distances); each round then multiplies the current level's edge
weights by exp(-eta * loss) and advances the forward weights, so the
total work over T rounds is linear in the transition count.

Per-round distributions: p_t[a] is the posterior marginal of the t-th
symbol given losses 1..t-1.  Forward weights, backward weights and label
flows are kept as :class:`SignedLog` values; the sign carries the
cancellation of shadowed paths when the machine has failure transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import phi as phimod
from .builders import length_automaton
from .phi import (PHI, PhiWfa, phi_backward_distances, phi_intersect,
                  power_weights_phi, shadowed_continuation, weight_push_phi)
from .signedlog import NEG_INF, SignedLog, log_sum
from .wfa import (Wfa, backward_distances, count_accepting_paths, intersect,
                  leveled_best_path, power_weights, state_levels, weight_push)

__all__ = [
    "HedgeState",
    "hedge_init",
    "hedge_step",
    "sample",
    "weighted_regret",
    "unweighted_regret",
    "best_competitor",
    "renyi_entropy",
    "shannon_entropy",
    "renyi_entropy_machine",
    "tune_eta_fixed",
    "tune_eta_renyi",
    "log_power_sum",
    "path_distribution",
    "RegretReport",
    "summarize",
]

ETA_FLOOR = 1e-6
ETA_CAP = 10.0

Machine = Union[Wfa, PhiWfa]


# -- preparation ---------------------------------------------------------------


def _phi_state_levels(machine: PhiWfa) -> list[Optional[int]]:
    """Consumed-symbol depth per state; phi moves stay within a level."""
    order = phimod._combined_topological_order(machine)
    levels: list[Optional[int]] = [None] * machine.num_states
    levels[machine.initial] = 0
    for q in order:
        if levels[q] is None:
            continue
        for t in machine.arcs(q).values():
            tgt = levels[q] + 1
            if levels[t.dst] is None:
                levels[t.dst] = tgt
            elif levels[t.dst] != tgt:
                raise ValueError("machine is not leveled")
        for t in machine.phi_arcs(q):
            if levels[t.dst] is None:
                levels[t.dst] = levels[q]
            elif levels[t.dst] != levels[q]:
                raise ValueError("machine is not leveled")
    return levels


@dataclass
class _Level:
    """Edges processed in one round: consuming edges leaving this level
    plus the phi edges inside it, in chain-topological order."""
    consuming: list[int]            # indices into machine.transitions
    phi: list[int]                  # same, topologically sorted
    shadows: dict[int, tuple[float, int]]  # consuming edge -> (chain log w, shadowed edge)


def _phi_depth_into(machine: Machine) -> list[int]:
    """Longest phi-path length into each state.  Sorting a level's phi
    edges by the source's depth makes hub mass available only after its
    parents have pushed theirs."""
    depth = [0] * machine.num_states
    if not isinstance(machine, PhiWfa):
        return depth
    phi_edges = [t for t in machine.transitions if t.label == PHI]
    for _ in range(machine.num_states + 1):
        changed = False
        for t in phi_edges:
            if depth[t.dst] < depth[t.src] + 1:
                depth[t.dst] = depth[t.src] + 1
                changed = True
        if not changed:
            break
    return depth


class HedgeState:
    """Mutable per-experiment state.  Single-writer: rounds are sequential."""

    def __init__(self, machine: Machine, competitor: Wfa, horizon: int, eta: float):
        self.machine = machine
        self.competitor = competitor  # C intersected with the length acceptor
        self.T = horizon
        self.eta = eta
        self.is_phi = isinstance(machine, PhiWfa) and machine.has_phi()
        self.rounds_done = 0
        self.num_experts = len(machine.alphabet)
        self.alphabet = machine.alphabet
        self.sym_index = {a: i for i, a in enumerate(machine.alphabet)}

        self.K = count_accepting_paths(competitor)
        self.log_Z = log_power_sum(competitor, 1.0)
        self.log_Z_eta = log_power_sum(competitor, eta)

        self.log_w = np.array([NEG_INF if t.weight == 0.0 else math.log(t.weight)
                               for t in machine.transitions])
        if self.is_phi:
            levels = _phi_state_levels(machine)
            beta_lin = phi_backward_distances(machine)
        else:
            levels = state_levels(machine)
            beta_lin = backward_distances(machine)
        self.level_of = levels
        self.beta = {q: SignedLog.from_linear(beta_lin[q]) for q in range(machine.num_states)}
        self.levels = self._group_levels()

        self.alpha = {machine.initial: SignedLog.one()}
        self.p_history: list[np.ndarray] = []
        self.loss_history: list[np.ndarray] = []
        self.expected_losses: list[float] = []
        self.touched_per_round: list[int] = []
        self.work_per_round: list[int] = []
        self.cumulative_loss = 0.0

        p1, touched = self._readout(0)
        self.p_current = p1
        self.p_history.append(p1)
        self._pending_touched = touched

    # -- machine structure --

    def _group_levels(self) -> list[_Level]:
        m = self.machine
        per: list[_Level] = [_Level([], [], {}) for _ in range(self.T + 1)]
        for i, t in enumerate(m.transitions):
            lv = self.level_of[t.src]
            if lv is None:
                continue
            if t.label == PHI:
                per[lv].phi.append(i)
            else:
                per[lv].consuming.append(i)
        depth_into = _phi_depth_into(m)
        for lv in per:
            lv.phi.sort(key=lambda i: depth_into[m.transitions[i].src])
        if self.is_phi:
            edge_at = {}
            for i, t in enumerate(m.transitions):
                if t.label != PHI:
                    edge_at[(t.src, t.label)] = i
            for lv in per:
                for i in lv.consuming:
                    t = m.transitions[i]
                    sc = shadowed_continuation(m, t.src, t.label)
                    if sc is not None:
                        w_chain, edge = sc
                        lv.shadows[i] = (math.log(w_chain) if w_chain > 0 else NEG_INF,
                                         edge_at[(edge.src, edge.label)])
        return per

    # -- passes --

    def _extend_alpha(self, level: int, alpha: dict[int, SignedLog]) -> tuple[dict[int, SignedLog], int]:
        """Propagate forward weights across the level's phi edges."""
        m = self.machine
        ext = dict(alpha)
        steps = 0
        for i in self.levels[level].phi:
            t = m.transitions[i]
            steps += 1
            src = ext.get(t.src)
            if src is None or src.is_zero():
                continue
            add = src.scaled(self.log_w[i])
            ext[t.dst] = ext.get(t.dst, SignedLog.zero()) + add
        return ext, steps

    def _flows(self, level: int) -> tuple[list[SignedLog], int]:
        """Per-label flows alpha * w * beta over this level's consuming edges."""
        m = self.machine
        ext, steps = self._extend_alpha(level, self.alpha)
        flows = [SignedLog.zero() for _ in self.alphabet]
        lv = self.levels[level]
        touched = steps
        for i in lv.consuming:
            t = m.transitions[i]
            touched += 1
            a = ext.get(t.src)
            if a is None or a.is_zero():
                continue
            j = self.sym_index[t.label]
            flows[j] = flows[j] + a.scaled(self.log_w[i]) * self.beta[t.dst]
            shadow = lv.shadows.get(i)
            if shadow is not None:
                touched += 1
                w_chain_log, sidx = shadow
                st = m.transitions[sidx]
                corr = a.scaled(w_chain_log + self.log_w[sidx]) * self.beta[st.dst]
                flows[j] = flows[j] - corr
        return flows, touched

    def _readout(self, level: int) -> tuple[np.ndarray, int]:
        flows, touched = self._flows(level)
        # Normalize in log domain before leaving it.
        logs = np.array([f.log if f.sign > 0 else NEG_INF for f in flows])
        if np.all(logs == NEG_INF):
            raise ValueError("no probability mass left at this level")
        mx = logs.max()
        p = np.exp(logs - mx)
        p /= p.sum()
        return p, touched

    def _apply_loss(self, level: int, loss: np.ndarray) -> None:
        m = self.machine
        for i in self.levels[level].consuming:
            t = m.transitions[i]
            self.log_w[i] += -self.eta * loss[self.sym_index[t.label]]

    def _advance_alpha(self, level: int) -> int:
        """Push alpha one level forward under the current edge weights."""
        m = self.machine
        lv = self.levels[level]
        ext, steps = self._extend_alpha(level, self.alpha)
        work = steps
        nxt: dict[int, SignedLog] = {}
        for i in lv.consuming:
            t = m.transitions[i]
            work += 1
            a = ext.get(t.src)
            if a is None or a.is_zero():
                continue
            nxt[t.dst] = nxt.get(t.dst, SignedLog.zero()) + a.scaled(self.log_w[i])
            shadow = lv.shadows.get(i)
            if shadow is not None:
                work += 1
                w_chain_log, sidx = shadow
                st = m.transitions[sidx]
                corr = a.scaled(w_chain_log + self.log_w[sidx])
                nxt[st.dst] = nxt.get(st.dst, SignedLog.zero()) - corr
        self.alpha = nxt
        return work


def hedge_init(competitor: Machine, horizon: int, eta: float) -> HedgeState:
    """Prepare the online state for a competitor automaton.

    Intersects with the length-``horizon`` acceptor, raises weights to
    the ``eta`` power, weight-pushes, and computes backward distances.
    The first distribution can be read off the initial state's outgoing
    transitions of the pushed machine.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    n = len(competitor.alphabet)
    s_t = length_automaton(n, horizon, alphabet=competitor.alphabet)
    if isinstance(competitor, PhiWfa) and competitor.has_phi():
        inter = phi_intersect(competitor, s_t)
        if not inter.finals:
            raise ValueError("no competitor sequence of this length")
        for q in range(inter.num_states):
            if len(inter.phi_arcs(q)) > 1:
                raise ValueError("engine requires chain-style phi machines")
        pushed = weight_push_phi(power_weights_phi(inter, eta))
        plain_inter = phimod.phi_expand(inter)
    else:
        if isinstance(competitor, PhiWfa):
            competitor = competitor.to_wfa()
        inter = intersect(competitor, s_t)
        if not inter.finals:
            raise ValueError("no competitor sequence of this length")
        pushed = weight_push(power_weights(inter, eta))
        plain_inter = inter
    return HedgeState(pushed, plain_inter, horizon, eta)


def hedge_step(state: HedgeState, loss: Sequence[float]) -> Optional[np.ndarray]:
    """Consume one loss vector; returns the next round's distribution.

    The final round (t == T) only settles the bookkeeping and returns
    None, as there is no position T+1 to predict.
    """
    t = state.rounds_done
    if t >= state.T:
        raise ValueError("stepping past the horizon")
    loss = np.asarray(loss, dtype=float)
    if loss.shape != (state.num_experts,):
        raise ValueError("loss vector has wrong length")
    if (loss < 0).any() or (loss > 1).any():
        raise ValueError("losses must lie in [0, 1]")

    expected = float(state.p_current @ loss)
    state.expected_losses.append(expected)
    state.cumulative_loss += expected
    state.loss_history.append(loss.copy())

    state._apply_loss(t, loss)
    work = state._advance_alpha(t)
    state.rounds_done += 1
    if state.rounds_done < state.T:
        p_next, touched = state._readout(state.rounds_done)
        state.p_current = p_next
        state.p_history.append(p_next)
    else:
        p_next, touched = None, 0
        state.p_current = None
    state.touched_per_round.append(state._pending_touched)
    state.work_per_round.append(state._pending_touched + work)
    state._pending_touched = touched
    return p_next


def sample(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; reproducible for a fixed generator state."""
    u = rng.random()
    c = 0.0
    for i, pi in enumerate(p):
        c += pi
        if u < c:
            return i
    return len(p) - 1


# -- path sums and regret -------------------------------------------------------


def log_power_sum(machine: Wfa, eta: float) -> float:
    """log of the sum over accepting paths of (path weight)**eta."""
    from .wfa import topological_order
    order = topological_order(machine)
    d = [NEG_INF] * machine.num_states
    for q in reversed(order):
        parts = []
        fw = machine.final_weight(q)
        if fw > 0.0:
            parts.append(eta * math.log(fw))
        for t in machine.arcs(q).values():
            if t.weight > 0.0 and d[t.dst] > NEG_INF:
                parts.append(eta * math.log(t.weight) + d[t.dst])
        d[q] = log_sum(parts) if parts else NEG_INF
    return d[machine.initial]


def path_distribution(machine: Wfa, limit: int = 100_000) -> dict[tuple[str, ...], float]:
    """Normalized path weights by enumeration (desk-scale helper)."""
    from .wfa import enumerate_support
    support = enumerate_support(machine, limit)
    z = sum(w for _, w in support)
    return {seq: w / z for seq, w in support}


def best_competitor(competitor: Wfa, losses: Sequence[np.ndarray],
                    weighted: bool) -> tuple[tuple[str, ...], float, float]:
    """Best supported sequence for the regret maximization.

    Returns (sequence, its cumulative loss, its log probability under the
    competitor distribution).  ``weighted`` adds the log-probability term
    to the maximized objective; ties break lexicographically.
    """
    losses = [np.asarray(l, dtype=float) for l in losses]
    sym = {a: i for i, a in enumerate(competitor.alphabet)}
    log_z = log_power_sum(competitor, 1.0)

    if weighted:
        def score(t, level):
            return -losses[level][sym[t.label]] + math.log(t.weight)
    else:
        def score(t, level):
            return -losses[level][sym[t.label]]

    def final_score(q):
        return math.log(competitor.final_weight(q)) if weighted else 0.0

    _, seq = leveled_best_path(competitor, score, final_score, maximize=True)
    path_loss = sum(losses[i][sym[a]] for i, a in enumerate(seq))
    from .wfa import evaluate
    log_q = math.log(evaluate(competitor, seq)) - log_z
    return seq, float(path_loss), log_q


def weighted_regret(p_rounds: Sequence[np.ndarray], losses: Sequence[np.ndarray],
                    competitor: Wfa) -> float:
    """Regret against the best supported sequence, including the
    log(q(x) K) prior-mass term."""
    algo = sum(float(np.dot(p, l)) for p, l in zip(p_rounds, losses))
    k = count_accepting_paths(competitor)
    seq, path_loss, log_q = best_competitor(competitor, losses, weighted=True)
    return algo - path_loss + log_q + math.log(k)


def unweighted_regret(p_rounds: Sequence[np.ndarray], losses: Sequence[np.ndarray],
                      competitor: Wfa) -> float:
    """Regret against the best supported sequence; weights play no role."""
    algo = sum(float(np.dot(p, l)) for p, l in zip(p_rounds, losses))
    _, path_loss, _ = best_competitor(competitor, losses, weighted=False)
    return algo - path_loss


# -- entropies and learning-rate tuning ------------------------------------------


def renyi_entropy(q, eta: float) -> float:
    """Order-``eta`` Renyi entropy of a distribution (eta != 1)."""
    if eta == 1.0:
        raise ValueError("order 1 is the Shannon limit; use shannon_entropy")
    if eta < 0:
        raise ValueError("order must be non-negative")
    q = np.asarray(q, dtype=float)
    q = q[q > 0]
    return float(np.log(np.sum(q ** eta)) / (1.0 - eta))


def shannon_entropy(q) -> float:
    q = np.asarray(q, dtype=float)
    q = q[q > 0]
    return float(-np.sum(q * np.log(q)))


def _renyi_smooth(q: np.ndarray, eta: float) -> float:
    if abs(eta - 1.0) < 1e-12:
        return shannon_entropy(q)
    return renyi_entropy(q, eta)


def renyi_entropy_machine(competitor: Wfa, eta: float) -> float:
    """Renyi entropy of the competitor path distribution, without
    enumerating it: uses log-domain power sums."""
    if eta == 1.0:
        raise ValueError("order 1 is the Shannon limit; use shannon_entropy")
    log_z = log_power_sum(competitor, 1.0)
    log_pow = log_power_sum(competitor, eta)
    return (log_pow - eta * log_z) / (1.0 - eta)


def tune_eta_fixed(horizon: int, num_sequences: int) -> float:
    """Minimizer sqrt(8 log K / T) of the fixed-rate regret bound,
    clamped away from degenerate exponents."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if num_sequences < 1:
        raise ValueError("need at least one sequence")
    eta = math.sqrt(8.0 * math.log(num_sequences) / horizon)
    return min(max(eta, ETA_FLOOR), ETA_CAP)


def tune_eta_renyi(q, horizon: int, tol: float = 1e-10) -> float:
    """Solve eta / sqrt(H_eta(q)) = sqrt(8 / T) by bisection.

    The left side is increasing in eta (H_eta is non-increasing), so the
    root is unique.  Requires at least two supported sequences.
    """
    q = np.asarray(q, dtype=float)
    q = q[q > 0]
    if q.size < 2:
        raise ValueError("entropy tuning needs at least two supported sequences")
    target = math.sqrt(8.0 / horizon)

    def f(eta: float) -> float:
        h = _renyi_smooth(q, eta)
        if h <= 0:
            return float("inf")
        return eta / math.sqrt(h) - target

    lo = 1e-12
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e9:
            raise RuntimeError("failed to bracket the tuning equation")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- reporting -------------------------------------------------------------------


@dataclass
class RegretReport:
    """Everything a run produced, regret values recomputable from it."""
    eta: float
    horizon: int
    num_experts: int
    num_sequences: int
    p_rounds: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    expected_losses: list = field(default_factory=list)
    cumulative_loss: float = 0.0
    best_sequence: Optional[tuple[str, ...]] = None
    best_sequence_loss: float = 0.0
    weighted_regret: float = 0.0
    unweighted_regret: float = 0.0
    weighted_bound: float = 0.0
    weighted_bound_loose: float = 0.0
    unweighted_bound: float = 0.0
    touched_per_round: list = field(default_factory=list)
    work_per_round: list = field(default_factory=list)
    seed: Optional[int] = None
    sampled: list = field(default_factory=list)


def summarize(state: HedgeState) -> RegretReport:
    """Regret values and bound values for a finished run."""
    if state.rounds_done != state.T:
        raise ValueError("run is not finished")
    ps, ls = state.p_history, state.loss_history
    ct = state.competitor
    w_reg = weighted_regret(ps, ls, ct)
    u_reg = unweighted_regret(ps, ls, ct)
    seq, path_loss, _ = best_competitor(ct, ls, weighted=True)
    eta, T, K = state.eta, state.T, state.K
    log_sum_q_eta = state.log_Z_eta - eta * state.log_Z
    bound_tight = eta * T / 8.0 + (1.0 / eta) * (eta * math.log(K) + log_sum_q_eta)
    bound_loose = eta * T / 8.0 + (1.0 / eta) * math.log(K)
    return RegretReport(
        eta=eta, horizon=T, num_experts=state.num_experts, num_sequences=K,
        p_rounds=[p.tolist() for p in ps],
        losses=[l.tolist() for l in ls],
        expected_losses=list(state.expected_losses),
        cumulative_loss=state.cumulative_loss,
        best_sequence=seq, best_sequence_loss=path_loss,
        weighted_regret=w_reg, unweighted_regret=u_reg,
        weighted_bound=bound_tight, weighted_bound_loose=bound_loose,
        unweighted_bound=bound_loose,
        touched_per_round=list(state.touched_per_round),
        work_per_round=list(state.work_per_round),
    )
