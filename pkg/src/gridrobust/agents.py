"""Baseline line-switching controllers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environment import DO_NOTHING, AgentAction, Environment, Observation, disconnect, reconnect


def act_do_nothing(observation: Observation) -> AgentAction:
    return DO_NOTHING


def act_reco_powerline(observation: Observation) -> AgentAction:
    """Reconnect the lowest-id line that is open and legal to close."""
    for lid in sorted(int(x) for x in observation.line_ids[~observation.connected]):
        if observation.can_reconnect(lid):
            return reconnect(lid)
    return DO_NOTHING


def greedy_candidates(observation: Observation, cap: int | None = None) -> list[AgentAction]:
    cands = [reconnect(lid) for lid in sorted(int(x) for x in observation.line_ids)
             if observation.can_reconnect(lid)]
    cands += [disconnect(lid) for lid in observation.connected_ids()]
    cands.sort(key=lambda a: a.line)
    if cap is not None:
        # keep the actions touching the most loaded lines
        load = {int(l): float(r) for l, r in zip(observation.line_ids, observation.rho)}
        cands = sorted(cands, key=lambda a: (-load[a.line], a.line))[:cap]
        cands.sort(key=lambda a: a.line)
    return cands


def act_greedy(observation: Observation, env: Environment, cap: int | None = None) -> AgentAction:
    """One-step lookahead at frozen injections: pick the legal single-line
    switch (or do-nothing) with the lowest simulated max loading.

    Ties go to do-nothing, then to the lowest line id; islanding outcomes are
    never chosen.
    """
    base = env.simulate(DO_NOTHING)
    best, best_val = DO_NOTHING, (float(np.max(base.rho)) if base is not None else np.inf)
    for action in greedy_candidates(observation, cap):
        sol = env.simulate(action)
        if sol is None:
            continue
        val = float(np.max(sol.rho))
        if val < best_val:
            best, best_val = action, val
    return best


class DoNothingAgent:
    name = "do_nothing"

    def act(self, observation, env=None):
        return act_do_nothing(observation)


class RecoPowerlineAgent:
    name = "reco_powerline"

    def act(self, observation, env=None):
        return act_reco_powerline(observation)


class GreedyLineSwitchAgent:
    name = "greedy_line_switch"

    def __init__(self, cap: int | None = None):
        self.cap = cap

    def act(self, observation, env):
        return act_greedy(observation, env, self.cap)


@dataclass(frozen=True)
class AgentConfig:
    kind: str = "do_nothing"
    params: dict = field(default_factory=dict, hash=False)


AGENT_KINDS = ("do_nothing", "reco_powerline", "greedy_line_switch")


def make_agent(config: AgentConfig | dict | str):
    if isinstance(config, str):
        config = AgentConfig(config)
    elif isinstance(config, dict):
        config = dict(config)
        kind = config.pop("kind", "do_nothing")
        config = AgentConfig(kind, config.pop("params", config))
    if config.kind == "do_nothing":
        return DoNothingAgent()
    if config.kind == "reco_powerline":
        return RecoPowerlineAgent()
    if config.kind == "greedy_line_switch":
        return GreedyLineSwitchAgent(config.params.get("cap"))
    raise ValueError(f"unknown agent kind {config.kind!r}")
