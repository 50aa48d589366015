"""Budget- and frequency-constrained line-disconnection opponents.

The weighted random opponent draws one attack time uniformly per attack
period and, at that time, attacks a connected attackable line with
probability proportional to ``rho_i / alpha_i``, where ``alpha_i`` is the
line's time-mean loading over a do-nothing rollout of the same scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .chronics import Chronics
from .environment import NO_ATTACK, Environment, Observation, OpponentAction, attack
from .grid import Grid

ALPHA_FLOOR = 1e-6


@dataclass(frozen=True)
class OpponentConfig:
    n_attack: int = 1
    d_attack: int = 48
    T_attack: int = 288
    attack_cost: float = 1.0
    budget_per_step: float = 1.0 / 288
    initial_budget: float = 1.0
    attackable: tuple[int, ...] | None = None  # None: the environment's set

    def __post_init__(self):
        if self.n_attack != 1:
            raise ValueError("only single-line attacks are supported (n_attack=1)")
        if self.d_attack < 1 or self.T_attack < 1:
            raise ValueError("d_attack and T_attack must be positive")
        if self.d_attack > self.T_attack:
            raise ValueError("d_attack must not exceed T_attack")
        if self.attack_cost <= 0 or self.budget_per_step < 0 or self.initial_budget < 0:
            raise ValueError("attack_cost must be positive and budgets non-negative")


@dataclass
class OpponentState:
    budget: float
    period: int = -1
    scheduled: int | None = None
    last_attack: int | None = None
    active: tuple[int, int] | None = None
    attack_counts: dict[int, int] = field(default_factory=dict)
    alpha: dict[int, float] = field(default_factory=dict)


def tick_budget(state: OpponentState, config: OpponentConfig) -> OpponentState:
    state.budget += config.budget_per_step
    return state


def schedule_attack_time(state: OpponentState, config: OpponentConfig,
                         rng: np.random.Generator, horizon: int | None = None) -> int | None:
    """Draw the attack time for period ``state.period``.

    Uniform over the steps of the period that are at least ``d_attack`` after
    the previous attack and, when given, below ``horizon``.
    """
    lo = state.period * config.T_attack
    hi = (state.period + 1) * config.T_attack - 1
    if state.last_attack is not None:
        lo = max(lo, state.last_attack + config.d_attack)
    if horizon is not None:
        hi = min(hi, horizon - 1)
    if lo > hi:
        return None
    return int(rng.integers(lo, hi + 1))


def wro_probabilities(rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Sampling distribution over candidates; uniform when every weight is 0."""
    w = np.asarray(rho, dtype=float) / np.asarray(alpha, dtype=float)
    total = w.sum()
    if not total > 0:
        return np.full(w.shape, 1.0 / w.size)
    return w / total


def wro_candidates(observation: Observation, attackable) -> list[int]:
    return [lid for lid in sorted(attackable)
            if observation.connected[observation.index(lid)]]


def wro_pick_line(observation: Observation, state: OpponentState, config: OpponentConfig,
                  rng: np.random.Generator, attackable=None) -> int | None:
    """Pick and book an attack at the scheduled step, or return ``None``.

    Skips (returns ``None``) when the budget is short, an attack is active or
    no attackable line is connected.
    """
    if state.budget < config.attack_cost or state.active is not None:
        return None
    if attackable is None:
        attackable = config.attackable or observation.attackable
    cands = wro_candidates(observation, attackable)
    if not cands:
        return None
    rho = np.array([observation.rho[observation.index(c)] for c in cands])
    alpha = np.array([state.alpha.get(c, 1.0) for c in cands])
    line = cands[int(rng.choice(len(cands), p=wro_probabilities(rho, alpha)))]
    state.budget -= config.attack_cost
    state.attack_counts[line] = state.attack_counts.get(line, 0) + 1
    state.active = (line, config.d_attack)
    state.last_attack = observation.t
    return line


def compute_alpha(grid: Grid, chronics: Chronics, config=None) -> dict[int, float]:
    """Time-mean loading of each attackable line over a do-nothing,
    opponent-free rollout, averaged over the steps where the line is
    connected and floored at ``ALPHA_FLOOR``."""
    env = Environment(grid, chronics, config)
    obs = env.reset()
    total = np.zeros(env.grid.n_lines)
    count = np.zeros(env.grid.n_lines)

    def accumulate(o):
        total[o.connected] += o.rho[o.connected]
        count[o.connected] += 1

    if env.termination_cause != "blackout":
        accumulate(obs)
    while not env.done:
        out = env.step()
        if out.termination_cause != "blackout":
            accumulate(out.observation)
    alpha = {}
    for lid in env.grid.attackable_ids:
        i = env.grid.line_index[lid]
        mean = total[i] / count[i] if count[i] else 0.0
        alpha[lid] = max(ALPHA_FLOOR, float(mean))
    return alpha


def delta_attack(attack_counts) -> int:
    """Largest pairwise gap between per-line attack counts."""
    counts = list(attack_counts.values()) if isinstance(attack_counts, dict) else list(attack_counts)
    if not counts:
        return 0
    return int(max(counts) - min(counts))


class DoNothingOpponent:
    name = "do_nothing"

    def __init__(self, config: OpponentConfig | None = None):
        self.config = config or OpponentConfig()
        self.state = OpponentState(self.config.initial_budget)

    def reset(self, env: Environment, rng: np.random.Generator) -> None:
        self.state = OpponentState(self.config.initial_budget)

    def act(self, observation: Observation) -> OpponentAction:
        return NO_ATTACK


class WeightedRandomOpponent:
    """Loading-weighted random line attacks under budget and frequency limits.

    ``alpha`` may be supplied; otherwise it is computed from a do-nothing
    rollout of the episode's scenario at reset.
    """

    name = "weighted_random"

    def __init__(self, config: OpponentConfig | None = None, alpha: dict[int, float] | None = None):
        self.config = config or OpponentConfig()
        self.alpha = alpha
        self._alpha_source = None
        self._alpha_cached: dict[int, float] = {}
        self.state = OpponentState(self.config.initial_budget)

    def reset(self, env: Environment, rng: np.random.Generator) -> None:
        self.rng = rng
        self.horizon = env.chronics.n_steps - 1  # actions apply only at t < horizon
        self.attackable = tuple(sorted(self.config.attackable or env.grid.attackable_ids))
        alpha = self.alpha
        if alpha is None:
            if self._alpha_source is not env.chronics:
                self._alpha_cached = compute_alpha(env.base_grid, env.chronics, env.config)
                self._alpha_source = env.chronics
            alpha = self._alpha_cached
        self.state = OpponentState(
            self.config.initial_budget,
            attack_counts={lid: 0 for lid in self.attackable},
            alpha={lid: alpha.get(lid, 1.0) for lid in self.attackable},
        )

    def act(self, observation: Observation) -> OpponentAction:
        st, cfg, t = self.state, self.config, observation.t
        tick_budget(st, cfg)
        if st.active is not None and observation.attack_active is None:
            st.active = None
        period = t // cfg.T_attack
        if period != st.period:
            st.period = period
            st.scheduled = schedule_attack_time(st, cfg, self.rng, self.horizon)
        if st.scheduled != t:
            return NO_ATTACK
        line = wro_pick_line(observation, st, cfg, self.rng, self.attackable)
        if line is None:
            return NO_ATTACK
        return attack(line, cfg.d_attack)


def make_opponent(spec: dict | None) -> DoNothingOpponent | WeightedRandomOpponent | None:
    """Build an opponent from a config mapping (``kind`` plus overrides)."""
    if spec is None:
        return None
    spec = dict(spec)
    kind = spec.pop("kind", "do_nothing")
    if kind in ("none", "disabled"):
        return None
    if "attackable" in spec and spec["attackable"] is not None:
        spec["attackable"] = tuple(int(x) for x in spec["attackable"])
    known = set(OpponentConfig.__dataclass_fields__)
    unknown = set(spec) - known
    if unknown:
        raise ValueError(f"unknown opponent options: {sorted(unknown)}")
    config = replace(OpponentConfig(), **spec)
    if kind == "do_nothing":
        return DoNothingOpponent(config)
    if kind == "weighted_random":
        return WeightedRandomOpponent(config)
    raise ValueError(f"unknown opponent kind {kind!r}")
