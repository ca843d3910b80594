"""Sleeping experts over automaton paths.

Each round the adversary reveals an awake subset of the alphabet; the
learner plays the current distribution conditioned on that subset and
only awake-labeled edges are reweighted.  The update then rescales the
awake edges so the total awake path mass is what it was before the
exponential step, leaving asleep paths untouched: the engine cannot
drift away from experts that have been asleep for a long time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .hedge import HedgeState, hedge_init
from .phi import PhiWfa
from .signedlog import SignedLog
from .wfa import Wfa, count_accepting_paths, evaluate

__all__ = [
    "ZeroAwakeMassError",
    "AwakeState",
    "awake_init",
    "awake_distribution",
    "awake_step",
    "SleepingRegret",
    "sleeping_regret",
    "vertex_comparators",
]


class ZeroAwakeMassError(ValueError):
    """No accepting path is awake at the current position."""


class AwakeState(HedgeState):
    """Hedge state plus the per-round awake bookkeeping."""

    def __init__(self, machine, competitor, horizon, eta):
        super().__init__(machine, competitor, horizon, eta)
        self.awake_history: list[np.ndarray] = []
        self.p_awake_history: list[np.ndarray] = []


def awake_init(competitor: Union[Wfa, PhiWfa], horizon: int, eta: float) -> AwakeState:
    """Same preparation as :func:`hedge_init`, for the sleeping protocol."""
    base = hedge_init(competitor, horizon, eta)
    if base.is_phi:
        raise ValueError("the sleeping engine runs on plain machines")
    st = AwakeState.__new__(AwakeState)
    st.__dict__.update(base.__dict__)
    st.awake_history = []
    st.p_awake_history = []
    return st


def _awake_mask(state: HedgeState, awake: Iterable) -> np.ndarray:
    mask = np.zeros(state.num_experts, dtype=bool)
    awake = list(awake)
    if not awake:
        raise ZeroAwakeMassError("empty awake set")
    if all(isinstance(a, (bool, np.bool_)) for a in awake) and len(awake) == state.num_experts:
        mask[:] = awake
    else:
        for a in awake:
            if a not in state.sym_index:
                raise ValueError(f"unknown expert {a!r}")
            mask[state.sym_index[a]] = True
    if not mask.any():
        raise ZeroAwakeMassError("empty awake set")
    return mask


def awake_distribution(state: HedgeState, awake: Iterable) -> np.ndarray:
    """Current distribution conditioned on the awake experts."""
    mask = _awake_mask(state, awake)
    p = state.p_current
    total = float(p[mask].sum())
    if total <= 0.0:
        raise ZeroAwakeMassError("awake set carries no probability mass")
    out = np.where(mask, p, 0.0)
    return out / total


def awake_step(state: AwakeState, awake: Iterable, loss: Sequence[float]
               ) -> Optional[np.ndarray]:
    """One sleeping round: exponential update on awake edges only,
    rescaled so the awake path mass is preserved.

    The loss must vanish on asleep experts.  Returns the next full
    distribution (None on the last round).
    """
    t = state.rounds_done
    if t >= state.T:
        raise ValueError("stepping past the horizon")
    mask = _awake_mask(state, awake)
    loss = np.asarray(loss, dtype=float)
    if loss.shape != (state.num_experts,):
        raise ValueError("loss vector has wrong length")
    if (loss < 0).any() or (loss > 1).any():
        raise ValueError("losses must lie in [0, 1]")
    if (loss[~mask] != 0).any():
        raise ValueError("loss must vanish on asleep experts")

    p_awake = awake_distribution(state, awake)
    expected = float(p_awake @ loss)
    state.expected_losses.append(expected)
    state.cumulative_loss += expected
    state.loss_history.append(loss.copy())
    state.awake_history.append(mask.copy())
    state.p_awake_history.append(p_awake)

    flows_before, _ = state._flows(t)
    before = _mass(flows_before, mask)
    if before.is_zero():
        raise ZeroAwakeMassError("awake set carries no path mass")

    m = state.machine
    for i in state.levels[t].consuming:
        tr = m.transitions[i]
        j = state.sym_index[tr.label]
        if mask[j]:
            state.log_w[i] += -state.eta * loss[j]
    flows_after, _ = state._flows(t)
    after = _mass(flows_after, mask)
    if after.is_zero():
        raise ZeroAwakeMassError("awake mass vanished under the update")
    scale = before.log - after.log
    for i in state.levels[t].consuming:
        tr = m.transitions[i]
        if mask[state.sym_index[tr.label]]:
            state.log_w[i] += scale

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


def _mass(flows: list[SignedLog], mask: np.ndarray) -> SignedLog:
    total = SignedLog.zero()
    for j, f in enumerate(flows):
        if mask[j]:
            total = total + f
    return total


# -- regret ---------------------------------------------------------------------


@dataclass(frozen=True)
class SleepingRegret:
    value: float
    bound: float
    awake_mass: float  # sum over rounds of u(A_t)


def sleeping_regret(awake_sets: Sequence[np.ndarray],
                    p_awake_rounds: Sequence[np.ndarray],
                    losses: Sequence[np.ndarray],
                    competitor: Wfa,
                    u: dict[tuple[str, ...], float],
                    eta: float) -> SleepingRegret:
    """Regret against a fixed mixture over accepting paths.

    Only rounds where a path is awake (its symbol at that position lies
    in the awake set) contribute, on both sides of the comparison.  Also
    returns the mixture-specific bound (eta/8) sum_t u(A_t) + log(K)/eta.
    """
    total = sum(u.values())
    if abs(total - 1.0) > 1e-9 or any(v < 0 for v in u.values()):
        raise ValueError("comparator must be a distribution over paths")
    for seq in u:
        if u[seq] > 0 and evaluate(competitor, seq) <= 0.0:
            raise ValueError(f"comparator puts mass on unsupported path {seq}")
    sym = {a: i for i, a in enumerate(competitor.alphabet)}
    k = count_accepting_paths(competitor)
    value = 0.0
    awake_mass = 0.0
    for t, (mask, p_awake, loss) in enumerate(zip(awake_sets, p_awake_rounds, losses)):
        exp_loss = float(np.dot(p_awake, loss))
        u_t = 0.0
        best_side = 0.0
        for seq, w in u.items():
            if w > 0 and mask[sym[seq[t]]]:
                u_t += w
                best_side += w * loss[sym[seq[t]]]
        value += u_t * exp_loss - best_side
        awake_mass += u_t
    bound = eta / 8.0 * awake_mass + math.log(k) / eta
    return SleepingRegret(value=value, bound=bound, awake_mass=awake_mass)


def vertex_comparators(competitor: Wfa, limit: int = 100_000):
    """Point-mass comparators, one per accepting path."""
    from .wfa import enumerate_support
    for seq, _ in enumerate_support(competitor, limit):
        yield {seq: 1.0}
