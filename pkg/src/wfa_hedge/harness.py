"""Experiment driver: declarative configs in, regret reports out.

A config names an automaton builder, a horizon, a learning rate (or
tuner), an optional n-gram approximation, optional failure-transition
compression, and a loss source.  Reports are plain dicts serialized with
sorted keys, so a fixed seed replays byte-identically.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import approx as approxmod
from . import ngram as ngrammod
from .builders import (exact_shift_automaton, hierarchy_automaton,
                       length_automaton, weighted_shift_automaton)
from .hedge import (hedge_init, hedge_step, path_distribution, sample,
                    summarize, tune_eta_fixed, tune_eta_renyi,
                    unweighted_regret, weighted_regret)
from .phi import PhiWfa, phi_convert
from .sleeping import (awake_distribution, awake_init, awake_step,
                       sleeping_regret, vertex_comparators)
from .textio import read_automaton
from .wfa import Wfa, count_accepting_paths, enumerate_support, intersect

__all__ = [
    "ExperimentConfig",
    "gen_losses",
    "read_losses_csv",
    "write_losses_csv",
    "read_awake_csv",
    "run_experiment",
    "report_to_json",
    "compare",
    "build_automaton",
]

VERTEX_CHECK_LIMIT = 200


# -- configuration ----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    automaton: dict
    horizon: int
    losses: dict
    eta: Any = "fixed"                 # float, or "fixed" / "renyi"
    algorithm: str = "hedge"           # hedge | awake-hedge
    approximation: Optional[dict] = None
    phi: bool = False
    awake: Optional[dict] = None
    seed: int = 0
    label: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        if "automaton" not in d or "horizon" not in d or "losses" not in d:
            raise ValueError("config needs automaton, horizon and losses")
        cfg = cls(**d)
        if cfg.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if cfg.algorithm not in ("hedge", "awake-hedge"):
            raise ValueError(f"unknown algorithm {cfg.algorithm!r}")
        if cfg.algorithm == "awake-hedge" and not cfg.awake:
            raise ValueError("awake-hedge needs an awake source")
        for key in ("path", "symbols"):
            if key in cfg.automaton and not os.path.exists(cfg.automaton[key]):
                raise ValueError(f"missing file {cfg.automaton[key]}")
        if "path" in cfg.losses and not os.path.exists(cfg.losses["path"]):
            raise ValueError(f"missing file {cfg.losses['path']}")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "automaton": self.automaton, "horizon": self.horizon,
            "losses": self.losses, "eta": self.eta, "algorithm": self.algorithm,
            "approximation": self.approximation, "phi": self.phi,
            "awake": self.awake, "seed": self.seed, "label": self.label,
        }


def build_automaton(spec: dict) -> Wfa:
    """Instantiate the automaton a config names (builder or files)."""
    if "path" in spec:
        machine = read_automaton(spec["path"], spec["symbols"])
        if isinstance(machine, PhiWfa):
            raise ValueError("experiment configs take plain machines; "
                             "phi compression is applied by the runner")
        return machine
    builder = spec.get("builder")
    params = dict(spec.get("params", {}))
    if builder == "kshift":
        return exact_shift_automaton(**params)
    if builder == "weighted-shift":
        params["weights"] = np.asarray(params["weights"], dtype=float)
        return weighted_shift_automaton(**params)
    if builder == "hierarchy":
        params["tiers"] = [tuple(t) for t in params["tiers"]]
        return hierarchy_automaton(**params)
    if builder == "length":
        return length_automaton(**params)
    if builder == "sequences":
        return Wfa.from_sequences(params["sequences"],
                                  alphabet=params.get("alphabet"))
    raise ValueError(f"unknown builder {builder!r}")


# -- loss and awake-set sources ------------------------------------------------------


def gen_losses(kind: str, params: dict, seed: int, horizon: int, num_experts: int
               ) -> np.ndarray:
    """Synthetic loss streams; every generator is seed-deterministic.

    piecewise_stationary: one favored low-mean expert per segment.
    iid_uniform: independent uniform [0, 1] entries.
    adversarial_best_path: the target sequence accumulates zero loss,
    everyone else stays expensive.
    """
    rng = np.random.default_rng(seed)
    if kind == "iid_uniform":
        return rng.random((horizon, num_experts))
    if kind == "piecewise_stationary":
        seg = int(params.get("segment_length", max(1, horizon // 4)))
        low = float(params.get("low", 0.1))
        high = float(params.get("high", 0.9))
        if seg < 1:
            raise ValueError("segment length must be >= 1")
        losses = np.empty((horizon, num_experts))
        favored = int(rng.integers(num_experts))
        for t in range(horizon):
            if t % seg == 0 and t > 0:
                favored = int(rng.integers(num_experts))
            means = np.full(num_experts, high)
            means[favored] = low
            losses[t] = (rng.random(num_experts) < means).astype(float)
        return losses
    if kind == "adversarial_best_path":
        target = params["target"]
        if isinstance(target, str):
            target = list(target)
        if len(target) != horizon:
            raise ValueError("target length must equal the horizon")
        alphabet = params.get("alphabet")
        if alphabet is None:
            from .wfa import default_alphabet
            alphabet = default_alphabet(num_experts)
        sym = {a: i for i, a in enumerate(alphabet)}
        losses = 0.5 + 0.5 * rng.random((horizon, num_experts))
        for t, a in enumerate(target):
            losses[t, sym[a]] = 0.0
        return losses
    raise ValueError(f"unknown loss generator {kind!r}")


def write_losses_csv(losses: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for row in losses:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")


def read_losses_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    return np.asarray(rows, dtype=float)


def read_awake_csv(path, alphabet) -> list[np.ndarray]:
    """One row per round: either a bitstring like 101 or symbols a;c."""
    sym = {a: i for i, a in enumerate(alphabet)}
    masks = []
    with open(path) as fh:
        for line in fh:
            token = line.strip()
            if not token:
                continue
            mask = np.zeros(len(alphabet), dtype=bool)
            if set(token) <= {"0", "1"} and len(token) == len(alphabet):
                mask[:] = [c == "1" for c in token]
            else:
                for name in token.split(";"):
                    mask[sym[name.strip()]] = True
            masks.append(mask)
    return masks


def _gen_awake(params: dict, seed: int, horizon: int, num_experts: int,
               ) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    density = float(params.get("density", 0.7))
    masks = []
    for _ in range(horizon):
        mask = np.zeros(num_experts, dtype=bool)
        while not mask.any():
            mask = rng.random(num_experts) < density
        masks.append(mask)
    return masks


# -- the pipeline -----------------------------------------------------------------


def _resolve_eta(cfg: ExperimentConfig, competitor_t: Wfa, horizon: int) -> float:
    if isinstance(cfg.eta, (int, float)):
        if cfg.eta <= 0:
            raise ValueError("eta must be positive")
        return float(cfg.eta)
    if cfg.eta == "fixed":
        return tune_eta_fixed(horizon, count_accepting_paths(competitor_t))
    if cfg.eta == "renyi":
        q = np.array(sorted(path_distribution(competitor_t).values()))
        return tune_eta_renyi(q, horizon)
    raise ValueError(f"unknown eta spec {cfg.eta!r}")


def _approximate(cfg: ExperimentConfig, machine: Wfa, competitor_t: Wfa):
    """Returns (played machine or model-backed machine, report fields)."""
    spec = cfg.approximation
    info: dict[str, Any] = {"kind": spec["kind"]}
    kind = spec["kind"]
    if kind == "ml-ngram":
        model = ngrammod.ml_ngram(competitor_t, int(spec["order"]))
    elif kind == "prod-eg":
        result = approxmod.prod_eg(competitor_t, int(spec["order"]),
                                   int(spec.get("iters", 200)))
        model = result.model
        info["iterations"] = result.iterations
    elif kind == "model-select":
        sel = approxmod.select_order(competitor_t, int(spec.get("iters", 200)),
                                     int(spec["budget"]))
        model = sel.model
        info.update(order=sel.order, feasible=sel.feasible,
                    budget_limited=sel.budget_limited)
    elif kind == "fixed-share-bigram":
        params = cfg.automaton.get("params", {})
        shifts = int(spec.get("shifts", params.get("shifts", 0)))
        n = len(machine.alphabet)
        model = ngrammod.fixed_share_bigram(n, shifts, cfg.horizon,
                                            alphabet=machine.alphabet)
    else:
        raise ValueError(f"unknown approximation {kind!r}")
    div = approxmod.divergence_inf(competitor_t, model)
    info["order"] = model.order
    info["divergence"] = div.value
    info["divergence_witness"] = list(div.witness)
    return model, info


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Build, optionally approximate and compress, play T rounds, report.

    The report is JSON-ready: config echo, seeds, per-round
    distributions, regrets, bound values and verdicts, edge counters.
    """
    machine = build_automaton(cfg.automaton)
    horizon = cfg.horizon
    n = len(machine.alphabet)

    if "path" in cfg.losses:
        losses = read_losses_csv(cfg.losses["path"])
    else:
        losses = gen_losses(cfg.losses["generator"], cfg.losses.get("params", {}),
                            int(cfg.losses.get("seed", cfg.seed)), horizon, n)
    if losses.shape != (horizon, n):
        raise ValueError(f"loss stream has shape {losses.shape}, "
                         f"expected {(horizon, n)}")
    if losses.min() < 0 or losses.max() > 1:
        raise ValueError("losses must lie in [0, 1]")

    competitor_t = intersect(machine, length_automaton(n, horizon,
                                                       alphabet=machine.alphabet))
    if not competitor_t.finals:
        raise ValueError("no competitor sequence at this horizon")
    eta = _resolve_eta(cfg, competitor_t, horizon)

    approx_info = None
    played: Any = machine
    if cfg.approximation is not None:
        model, approx_info = _approximate(cfg, machine, competitor_t)
        if cfg.phi:
            try:
                played = ngrammod.bigram_phi_machine(model)
                approx_info["phi_form"] = "shared-shift-hub"
            except ValueError:
                played = phi_convert(ngrammod.ngram_to_wfa(model))
                approx_info["phi_form"] = "generic"
        else:
            played = ngrammod.ngram_to_wfa(model)
    elif cfg.phi:
        played = phi_convert(machine)

    rng = np.random.default_rng(cfg.seed)
    report: dict[str, Any] = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "eta": eta,
        "num_experts": n,
        "horizon": horizon,
        "alphabet": list(machine.alphabet),
    }

    if cfg.algorithm == "awake-hedge":
        state = awake_init(played, horizon, eta)
        if "path" in cfg.awake:
            masks = read_awake_csv(cfg.awake["path"], machine.alphabet)
        else:
            masks = _gen_awake(cfg.awake.get("params", {}),
                               int(cfg.awake.get("seed", cfg.seed)), horizon, n)
        if len(masks) != horizon:
            raise ValueError("awake stream length must equal the horizon")
        sampled = []
        for t in range(horizon):
            p_awake = awake_distribution(state, masks[t])
            sampled.append(int(sample(p_awake, rng)))
            awake_step(state, masks[t], losses[t] * masks[t])
        report["awake_sets"] = ["".join("1" if b else "0" for b in m) for m in masks]
        report["p_awake_rounds"] = [p.tolist() for p in state.p_awake_history]
        k = state.K
        verdict = True
        worst = -math.inf
        comparators = (vertex_comparators(state.competitor)
                       if k <= VERTEX_CHECK_LIMIT else _best_point_mass(state))
        for u in comparators:
            r = sleeping_regret(masks, state.p_awake_history, losses,
                                state.competitor, u, eta)
            worst = max(worst, r.value - r.bound)
            if r.value > r.bound:
                verdict = False
        report["verdicts"] = {"sleeping_bound_ok": verdict}
        report["sleeping_bound_margin"] = -worst
    else:
        state = hedge_init(played, horizon, eta)
        sampled = []
        for t in range(horizon):
            sampled.append(int(sample(state.p_current, rng)))
            hedge_step(state, losses[t])
        rep = summarize(state)
        report["p_rounds"] = rep.p_rounds
        report["weighted_regret_played"] = rep.weighted_regret
        report["unweighted_regret_played"] = rep.unweighted_regret
        report["weighted_bound"] = rep.weighted_bound
        report["weighted_bound_loose"] = rep.weighted_bound_loose
        report["unweighted_bound"] = rep.unweighted_bound
        report["best_sequence_played"] = list(rep.best_sequence)

        # Regret against the original competitor class, which is what
        # matters when an approximation was played.
        w_reg = weighted_regret(state.p_history, list(losses), competitor_t)
        u_reg = unweighted_regret(state.p_history, list(losses), competitor_t)
        report["weighted_regret"] = w_reg
        report["unweighted_regret"] = u_reg
        k = count_accepting_paths(competitor_t)
        report["num_sequences"] = k
        verdicts = {}
        if cfg.approximation is None:
            verdicts["weighted_bound_ok"] = bool(w_reg <= rep.weighted_bound)
            if _uniform_weights(competitor_t):
                verdicts["unweighted_bound_ok"] = bool(u_reg <= rep.unweighted_bound)
        else:
            div = approx_info["divergence"]
            bound = eta * horizon / 8.0 + math.log(k) / eta + div
            report["approx_bound"] = bound
            verdicts["approx_bound_ok"] = bool(w_reg <= bound)
        report["verdicts"] = verdicts

    report["sampled_experts"] = sampled
    report["expected_losses"] = list(state.expected_losses)
    report["cumulative_loss"] = state.cumulative_loss
    report["touched_edges_per_round"] = list(state.touched_per_round)
    report["work_per_round"] = list(state.work_per_round)
    if approx_info is not None:
        report["approximation"] = approx_info
    return report


def _best_point_mass(state):
    from .hedge import best_competitor
    seq, _, _ = best_competitor(state.competitor, state.loss_history, weighted=False)
    yield {seq: 1.0}


def _uniform_weights(machine: Wfa) -> bool:
    support = enumerate_support(machine, 100_000)
    ws = [w for _, w in support]
    return max(ws) - min(ws) < 1e-12


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def compare(configs: list[ExperimentConfig]) -> dict:
    """Run several configs against one shared loss stream.

    All configs must agree on (num experts, horizon); the first config's
    loss source wins and is replayed for everyone.
    """
    if not configs:
        raise ValueError("nothing to compare")
    reports = []
    base = None
    for cfg in configs:
        machine = build_automaton(cfg.automaton)
        key = (len(machine.alphabet), cfg.horizon)
        if base is None:
            base = key
        elif key != base:
            raise ValueError(f"config {cfg.label or ''} has {key}, expected {base}")
    shared = configs[0].losses
    rows = []
    for cfg in configs:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "losses": shared})
        rep = run_experiment(cfg)
        reports.append(rep)
        rows.append({
            "label": cfg.label or cfg.automaton.get("builder", "machine"),
            "algorithm": cfg.algorithm,
            "phi": cfg.phi,
            "approximation": (cfg.approximation or {}).get("kind"),
            "cumulative_loss": rep["cumulative_loss"],
            "weighted_regret": rep.get("weighted_regret"),
            "unweighted_regret": rep.get("unweighted_regret"),
            "max_touched_edges": max(rep["touched_edges_per_round"]),
            "total_work": sum(rep["work_per_round"]),
            "verdicts": rep["verdicts"],
        })
    return {"rows": rows, "reports": reports}
