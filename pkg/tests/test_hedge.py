import math

import numpy as np
import pytest

from wfa_hedge.builders import (exact_shift_automaton, hierarchy_automaton,
                                length_automaton, weighted_shift_automaton)
from wfa_hedge.hedge import (hedge_init, hedge_step, renyi_entropy,
                             renyi_entropy_machine, sample, shannon_entropy,
                             summarize, tune_eta_fixed, tune_eta_renyi,
                             unweighted_regret, weighted_regret)
from wfa_hedge.ngram import bigram_phi_machine, fixed_share_bigram
from wfa_hedge.phi import phi_convert
from wfa_hedge.wfa import enumerate_support, intersect

import oracles


def run_rounds(state, losses):
    for loss in losses:
        hedge_step(state, loss)
    return state


# -- initialization ----------------------------------------------------------------


def test_p1_uniform_on_length_machine():
    st = hedge_init(length_automaton(4, 3), 3, 0.5)
    assert np.allclose(st.p_current, 0.25)


def test_p1_matches_first_position_marginal():
    st = hedge_init(exact_shift_automaton(3, 2), 6, 1.0)
    support = enumerate_support(st.competitor)
    marg = np.zeros(3)
    sym = {a: i for i, a in enumerate(st.alphabet)}
    for seq, w in support:
        marg[sym[seq[0]]] += w
    marg /= marg.sum()
    assert np.allclose(st.p_current, marg, atol=1e-12)


def test_p1_reflects_eta_power_of_weights():
    w = np.array([[0.9, 0.1], [0.1, 0.9]])
    m = weighted_shift_automaton(w, initial_weights=[0.8, 0.2])
    eta = 0.5
    st = hedge_init(m, 3, eta)
    support = enumerate_support(st.competitor)
    z = sum(wt for _, wt in support)
    tilted = {}
    for seq, wt in support:
        tilted[seq] = (wt / z) ** eta
    znew = sum(tilted.values())
    marg = np.zeros(2)
    sym = {a: i for i, a in enumerate(st.alphabet)}
    for seq, wt in tilted.items():
        marg[sym[seq[0]]] += wt / znew
    assert np.allclose(st.p_current, marg, atol=1e-12)


def test_init_rejects_empty_intersection():
    # two experts, three shifts, horizon 3: impossible
    with pytest.raises(ValueError):
        hedge_init(exact_shift_automaton(2, 3), 3, 0.5)


def test_init_rejects_bad_eta():
    with pytest.raises(ValueError):
        hedge_init(length_automaton(2, 2), 2, 0.0)


# -- per-round distributions -----------------------------------------------------------


def test_zero_losses_keep_prior_marginals():
    st = hedge_init(exact_shift_automaton(3, 1), 5, 0.7)
    support = enumerate_support(st.competitor)
    oracle = oracles.brute_distributions(
        support, 0.7, [np.zeros(3)] * 5, st.alphabet)
    ps = [st.p_current]
    for _ in range(4):
        ps.append(hedge_step(st, np.zeros(3)))
    for got, want in zip(ps, oracle):
        assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_matches_brute_force_on_kshift(seed):
    eta = 0.6
    st = hedge_init(exact_shift_automaton(3, 2), 6, eta)
    rng = np.random.default_rng(seed)
    losses = [rng.random(3) for _ in range(6)]
    support = enumerate_support(st.competitor)
    oracle = oracles.brute_distributions(support, eta, losses, st.alphabet)
    ps = [st.p_current]
    for t in range(6):
        nxt = hedge_step(st, losses[t])
        if nxt is not None:
            ps.append(nxt)
    for got, want in zip(ps, oracle):
        assert np.abs(got - want).max() < 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_matches_brute_force_on_weighted_machine(seed):
    w = np.array([[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.25, 0.25, 0.5]])
    machine = weighted_shift_automaton(w, initial_weights=[0.5, 0.3, 0.2])
    eta, horizon = 0.9, 5
    st = hedge_init(machine, horizon, eta)
    rng = np.random.default_rng(100 + seed)
    losses = [rng.random(3) for _ in range(horizon)]
    support = enumerate_support(st.competitor)
    oracle = oracles.brute_distributions(support, eta, losses, st.alphabet)
    ps = [st.p_current]
    for t in range(horizon):
        nxt = hedge_step(st, losses[t])
        if nxt is not None:
            ps.append(nxt)
    for got, want in zip(ps, oracle):
        assert np.abs(got - want).max() < 1e-9


def test_two_expert_concentration_rate():
    # one expert losing 1 every round: odds decay like exp(-eta t)
    eta = 0.5
    st = hedge_init(exact_shift_automaton(2, 0), 6, eta)
    loss = np.array([1.0, 0.0])
    ratios = []
    p = st.p_current
    for _ in range(5):
        p = hedge_step(st, loss)
        ratios.append(p[0] / p[1])
    for t, r in enumerate(ratios, start=1):
        assert r == pytest.approx(math.exp(-eta * t), rel=1e-9)


def test_step_validates_input():
    st = hedge_init(length_automaton(2, 2), 2, 0.5)
    with pytest.raises(ValueError):
        hedge_step(st, [0.5])
    with pytest.raises(ValueError):
        hedge_step(st, [0.5, 1.5])
    hedge_step(st, [0.1, 0.2])
    hedge_step(st, [0.1, 0.2])
    with pytest.raises(ValueError):
        hedge_step(st, [0.1, 0.2])


def test_distributions_normalized():
    st = hedge_init(exact_shift_automaton(4, 2), 7, 1.3)
    rng = np.random.default_rng(8)
    for _ in range(6):
        p = hedge_step(st, rng.random(4))
        assert p.min() >= 0 and abs(p.sum() - 1.0) < 1e-9


def test_long_horizon_stays_normalized():
    # half a million competitor sequences: enumeration is hopeless, the
    # level recursion is not, and the log-domain weights cannot underflow
    horizon = 300
    st = hedge_init(exact_shift_automaton(3, 2), horizon, 0.5)
    assert st.K > 500_000
    rng = np.random.default_rng(0)
    for _ in range(horizon):
        p = st.p_current
        assert p.min() >= 0 and abs(p.sum() - 1.0) <= 1e-9
        hedge_step(st, rng.random(3))
    rep = summarize(st)
    assert rep.weighted_regret <= rep.weighted_bound


def test_touched_edges_equal_level_sizes():
    st = hedge_init(exact_shift_automaton(3, 2), 6, 0.5)
    level_sizes = [len(lv.consuming) for lv in st.levels]
    rng = np.random.default_rng(0)
    for _ in range(6):
        hedge_step(st, rng.random(3))
    assert st.touched_per_round == level_sizes[:6]


# -- failure-transition backend ----------------------------------------------------------


def test_phi_backend_equals_plain_on_converted_machine():
    rng = np.random.default_rng(9)
    p = None
    while p is None or not p.has_phi():
        m = oracles.random_shared_structure_wfa(rng, layers=(1, 4, 3, 2, 1))
        if m is None:
            continue
        p = phi_convert(m)
    horizon, eta = 4, 0.8
    st_plain = hedge_init(m, horizon, eta)
    st_phi = hedge_init(p, horizon, eta)
    for t in range(horizon):
        loss = rng.random(3)
        a = hedge_step(st_plain, loss)
        b = hedge_step(st_phi, loss)
        if a is not None:
            assert np.abs(a - b).max() < 1e-9


def test_phi_backend_differential_sweep():
    # many random convertible machines, several loss streams each
    rng = np.random.default_rng(77)
    machines = []
    while len(machines) < 12:
        depth = int(rng.integers(2, 5))
        layers = tuple([1] + [int(rng.integers(2, 5)) for _ in range(depth)] + [1])
        m = oracles.random_shared_structure_wfa(rng, layers=layers)
        if m is None:
            continue
        p = phi_convert(m)
        if p.has_phi():
            machines.append((m, p))
    for m, p in machines:
        horizon = min(4, max(len(s) for s, _ in enumerate_support(m)))
        for seed in range(3):
            eta = 0.3 + 0.4 * ((seed + 1) / 3)
            try:
                st_plain = hedge_init(m, horizon, eta)
            except ValueError:
                continue  # no sequence of that length
            st_phi = hedge_init(p, horizon, eta)
            loss_rng = np.random.default_rng(seed)
            for _ in range(horizon):
                loss = loss_rng.random(3)
                a = hedge_step(st_plain, loss)
                b = hedge_step(st_phi, loss)
                if a is not None:
                    assert np.abs(a - b).max() < 1e-9


def test_phi_backend_two_hop_chain_shadowing():
    # fallback chain u -> h1 -> h2 with shadowing at both depths: u's
    # direct a hides h2's a two hops down, h1's direct b hides h2's b
    from wfa_hedge.phi import PHI, PhiWfa, phi_expand
    from wfa_hedge.wfa import Transition
    ts = [
        Transition(0, "a", 0.3, 1), Transition(0, "b", 0.3, 1),
        Transition(0, "c", 0.4, 1),
        Transition(1, "a", 0.6, 4),
        Transition(1, PHI, 0.5, 2),
        Transition(2, "b", 0.7, 4),
        Transition(2, PHI, 0.25, 3),
        Transition(3, "a", 0.2, 4), Transition(3, "b", 0.1, 4),
        Transition(3, "c", 0.9, 4),
    ]
    machine = PhiWfa(("a", "b", "c"), 5, 0, {4: 1.0}, ts)
    assert machine.max_phi_chain_depth() == 2
    plain = phi_expand(machine)
    for eta in (0.4, 1.1):
        for seed in range(5):
            st_phi = hedge_init(machine, 2, eta)
            st_plain = hedge_init(plain, 2, eta)
            rng = np.random.default_rng(seed)
            assert np.abs(st_phi.p_current - st_plain.p_current).max() < 1e-12
            for _ in range(2):
                loss = rng.random(3)
                a = hedge_step(st_plain, loss)
                b = hedge_step(st_phi, loss)
                if a is not None:
                    assert np.abs(a - b).max() < 1e-12


def test_phi_backend_equals_plain_on_compact_bigram():
    n, k, horizon = 5, 1, 8
    model = fixed_share_bigram(n, k, horizon)
    from wfa_hedge.ngram import ngram_to_wfa
    plain = ngram_to_wfa(model)
    compact = bigram_phi_machine(model)
    eta = 0.9
    st_plain = hedge_init(plain, horizon, eta)
    st_phi = hedge_init(compact, horizon, eta)
    rng = np.random.default_rng(10)
    for t in range(horizon):
        loss = rng.random(n)
        a = hedge_step(st_plain, loss)
        b = hedge_step(st_phi, loss)
        if a is not None:
            assert np.abs(a - b).max() < 1e-9
    assert max(st_phi.touched_per_round) <= 4 * n
    assert max(st_plain.touched_per_round) >= n * n


# -- sampling -----------------------------------------------------------------------------


def test_sample_point_mass():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert sample(np.array([0.0, 1.0, 0.0]), rng) == 1


def test_sample_deterministic_replay():
    draws1 = [sample(np.ones(3) / 3, np.random.default_rng(42)) for _ in range(1)]
    draws2 = [sample(np.ones(3) / 3, np.random.default_rng(42)) for _ in range(1)]
    assert draws1 == draws2


def test_sample_frequencies():
    p = np.array([0.2, 0.5, 0.3])
    rng = np.random.default_rng(7)
    n = 100_000
    counts = np.bincount([sample(p, rng) for _ in range(n)], minlength=3)
    freq = counts / n
    sigma = np.sqrt(p * (1 - p) / n)
    assert (np.abs(freq - p) <= 3 * sigma).all()


# -- regret ------------------------------------------------------------------------------


def test_weighted_regret_matches_enumeration():
    eta = 0.6
    st = hedge_init(exact_shift_automaton(3, 2), 6, eta)
    rng = np.random.default_rng(11)
    losses = [rng.random(3) for _ in range(6)]
    run_rounds(st, losses)
    support = enumerate_support(st.competitor)
    algo = sum(st.expected_losses)
    z = sum(w for _, w in support)
    sym = {a: i for i, a in enumerate(st.alphabet)}
    brute = max(
        algo - sum(losses[t][sym[a]] for t, a in enumerate(seq))
        + math.log(w / z) + math.log(len(support))
        for seq, w in support)
    got = weighted_regret(st.p_history, losses, st.competitor)
    assert got == pytest.approx(brute, rel=1e-12)


def test_uniform_weights_make_regrets_equal():
    eta = 0.4
    st = hedge_init(exact_shift_automaton(3, 1), 5, eta)
    rng = np.random.default_rng(12)
    losses = [rng.random(3) for _ in range(5)]
    run_rounds(st, losses)
    w = weighted_regret(st.p_history, losses, st.competitor)
    u = unweighted_regret(st.p_history, losses, st.competitor)
    assert w == pytest.approx(u, abs=1e-9)


def test_constant_sequences_reduce_to_static_regret():
    eta = 0.5
    st = hedge_init(exact_shift_automaton(3, 0), 5, eta)
    rng = np.random.default_rng(13)
    losses = [rng.random(3) for _ in range(5)]
    run_rounds(st, losses)
    static = max(
        sum(st.expected_losses) - sum(l[i] for l in losses)
        for i in range(3))
    assert unweighted_regret(st.p_history, losses, st.competitor) == pytest.approx(static)
    assert weighted_regret(st.p_history, losses, st.competitor) == pytest.approx(static)


@pytest.mark.parametrize("builder", ["kshift", "weighted", "hierarchy"])
@pytest.mark.parametrize("seed", range(4))
def test_regret_bounds_hold(builder, seed):
    if builder == "kshift":
        machine = exact_shift_automaton(3, 2)
    elif builder == "weighted":
        w = np.array([[0.8, 0.15, 0.05], [0.1, 0.8, 0.1], [0.05, 0.15, 0.8]])
        machine = weighted_shift_automaton(w)
    else:
        machine = hierarchy_automaton([("a", 0), ("b", 1), ("c", 2)])
    horizon, eta = 6, 0.7
    st = hedge_init(machine, horizon, eta)
    rng = np.random.default_rng(seed)
    losses = [rng.random(3) for _ in range(horizon)]
    run_rounds(st, losses)
    rep = summarize(st)
    assert rep.weighted_regret <= rep.weighted_bound
    assert rep.weighted_bound <= rep.weighted_bound_loose + 1e-12


def test_entropy_tuned_rate_bound():
    # at the entropy-tuned rate, regret is within
    # sqrt(T H / 2) - H + log K, which beats sqrt(T log K / 2) when the
    # competitor distribution is concentrated
    w = np.array([[0.85, 0.1, 0.05], [0.05, 0.9, 0.05], [0.1, 0.1, 0.8]])
    machine = weighted_shift_automaton(w)
    horizon = 8
    probe = hedge_init(machine, horizon, 0.5)
    support = enumerate_support(probe.competitor)
    z = sum(x for _, x in support)
    q = np.array([x / z for _, x in support])
    eta = tune_eta_renyi(q, horizon)
    h = renyi_entropy(q, eta)
    bound = math.sqrt(horizon * h / 2) - h + math.log(len(q))
    assert h < math.log(len(q))  # concentration makes the bound tighter
    for seed in range(10):
        st = hedge_init(machine, horizon, eta)
        rng = np.random.default_rng(seed)
        losses = [rng.random(3) for _ in range(horizon)]
        run_rounds(st, losses)
        assert weighted_regret(st.p_history, losses, st.competitor) <= bound


def test_zero_loss_target_gives_clean_regret():
    # losses crafted so one switching sequence never loses: the regret
    # against it is exactly the cumulative expected loss
    from wfa_hedge.harness import gen_losses
    horizon = 6
    target = "aabbcc"
    losses = list(gen_losses("adversarial_best_path", {"target": target},
                             3, horizon, 3))
    st = hedge_init(exact_shift_automaton(3, 2), horizon, 0.8)
    run_rounds(st, losses)
    u = unweighted_regret(st.p_history, losses, st.competitor)
    assert u == pytest.approx(sum(st.expected_losses), rel=1e-12)
    rep = summarize(st)
    assert u <= rep.unweighted_bound


# -- entropies and tuning ----------------------------------------------------------------


def test_renyi_entropy_uniform_is_log_k():
    q = np.ones(120) / 120
    for eta in (0.1, 0.5, 0.9, 2.0):
        assert renyi_entropy(q, eta) == pytest.approx(math.log(120), rel=1e-12)


def test_renyi_entropy_order_zero_counts_support():
    q = np.array([0.9, 0.05, 0.05, 0.0])
    assert renyi_entropy(q, 0.0) == pytest.approx(math.log(3))
    assert renyi_entropy(q, 1e-9) == pytest.approx(math.log(3), rel=1e-6)


def test_renyi_entropy_rejects_order_one():
    with pytest.raises(ValueError):
        renyi_entropy(np.ones(4) / 4, 1.0)


def test_renyi_entropy_concentrated_distribution():
    # nearly all mass on 3 of 1000 outcomes: entropy close to log 3
    q = np.full(1000, 1e-9)
    q[:3] = (1 - q[3:].sum()) / 3
    h = renyi_entropy(q, 0.5)
    assert h <= math.log(3) + 0.1


def test_renyi_entropy_machine_matches_enumeration():
    b = intersect(exact_shift_automaton(3, 2), length_automaton(3, 6))
    support = enumerate_support(b)
    z = sum(w for _, w in support)
    q = np.array([w / z for _, w in support])
    for eta in (0.3, 0.8, 2.0):
        assert renyi_entropy_machine(b, eta) == pytest.approx(
            renyi_entropy(q, eta), rel=1e-12)


def test_tune_eta_fixed():
    assert tune_eta_fixed(8 * math.log(100), 100) == pytest.approx(1.0)
    assert tune_eta_fixed(10, 1) == 1e-6  # clamped floor
    eta = tune_eta_fixed(100, 50)
    bound = lambda e: e * 100 / 8 + math.log(50) / e
    for trial in np.linspace(0.01, 3.0, 100):
        assert bound(eta) <= bound(trial) + 1e-9


def test_tune_eta_renyi_uniform_matches_fixed():
    q = np.ones(64) / 64
    assert tune_eta_renyi(q, 50) == pytest.approx(tune_eta_fixed(50, 64), rel=1e-8)


def test_tune_eta_renyi_residual_and_monotonicity():
    rng = np.random.default_rng(14)
    q = rng.random(40)
    q /= q.sum()
    etas = []
    for horizon in (10, 20, 40, 80):
        eta = tune_eta_renyi(q, horizon)
        h = renyi_entropy(q, eta) if eta != 1.0 else shannon_entropy(q)
        assert abs(eta / math.sqrt(h) - math.sqrt(8.0 / horizon)) <= 1e-9
        etas.append(eta)
    assert all(a > b for a, b in zip(etas, etas[1:]))


def test_tune_eta_renyi_rejects_singleton():
    with pytest.raises(ValueError):
        tune_eta_renyi(np.array([1.0]), 10)
