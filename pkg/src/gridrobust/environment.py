"""Sequential agent/opponent/grid loop.

Within one ``step`` the opponent's attack lands first, then the agent's
action, then scheduled maintenance, then injections advance and flows are
solved. Overloaded lines trip (instantly above ``hard_overflow``, or after
``soft_overflow_steps`` consecutive overloaded solves) and the flows are
re-solved once. Illegal actions are ignored and reported in ``info``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from . import _backend
from .chronics import Chronics
from .errors import StepAfterDone
from .grid import FlowSolution, Grid, _solve

AGENT = "agent"
OPPONENT = "opponent"
MAINTENANCE = "maintenance"
OVERLOAD = "overload-trip"

COMPLETED = "completed"
BLACKOUT = "blackout"
ISLANDED_LOAD = "islanded_load"


@dataclass(frozen=True)
class AgentAction:
    kind: str = "do_nothing"  # do_nothing | reconnect | disconnect
    line: int | None = None

    def __str__(self):
        return self.kind if self.line is None else f"{self.kind}:{self.line}"

    @classmethod
    def parse(cls, text: str) -> AgentAction:
        kind, _, line = text.partition(":")
        return cls(kind, int(line) if line else None)


@dataclass(frozen=True)
class OpponentAction:
    kind: str = "do_nothing"  # do_nothing | attack
    line: int | None = None
    duration: int = 0

    def __str__(self):
        return self.kind if self.line is None else f"{self.kind}:{self.line}:{self.duration}"


DO_NOTHING = AgentAction()
NO_ATTACK = OpponentAction()


def reconnect(line: int) -> AgentAction:
    return AgentAction("reconnect", line)


def disconnect(line: int) -> AgentAction:
    return AgentAction("disconnect", line)


def attack(line: int, duration: int) -> OpponentAction:
    return OpponentAction("attack", line, duration)


@dataclass(frozen=True)
class EnvConfig:
    hard_overflow: float = 2.0
    soft_overflow_steps: int = 3
    cooldown: int = 12


@dataclass(frozen=True)
class Observation:
    """Snapshot shared verbatim with the agent and the opponent.

    Per-line arrays follow ``line_ids`` order. ``cause[i]`` is why line i is
    open (``None`` when connected). ``cooldown[i]`` counts further steps in
    which a reconnection would be refused. ``attack_active`` is
    ``(line_id, remaining_steps)`` or ``None``.
    """

    t: int
    rho: np.ndarray
    flow: np.ndarray
    connected: np.ndarray
    cause: tuple[str | None, ...]
    cooldown: np.ndarray
    in_maintenance: np.ndarray
    injections: np.ndarray
    attack_active: tuple[int, int] | None
    total_load: float
    line_ids: np.ndarray = field(repr=False)
    attackable: tuple[int, ...] = ()

    def index(self, line_id: int) -> int:
        return int(np.flatnonzero(self.line_ids == line_id)[0])

    def connected_ids(self) -> list[int]:
        return [int(i) for i in self.line_ids[self.connected]]

    def can_reconnect(self, line_id: int) -> bool:
        i = self.index(line_id)
        under_attack = self.attack_active is not None and self.attack_active[0] == line_id
        return (not self.connected[i] and self.cooldown[i] == 0
                and not self.in_maintenance[i] and not under_attack)


@dataclass
class StepOutcome:
    observation: Observation
    reward: float
    done: bool
    termination_cause: str | None
    info: dict


def margin_reward(rho: np.ndarray, connected: np.ndarray) -> float:
    """Mean over all lines of max(0, 1 - rho^2); open lines count as 0."""
    margin = np.where(connected, np.maximum(0.0, 1.0 - rho * rho), 0.0)
    return float(margin.mean())


class Environment:
    def __init__(self, grid: Grid, chronics: Chronics, config: EnvConfig | None = None):
        self.base_grid = grid
        self.grid = grid.with_attackable(chronics.maintenance_lines)
        if chronics.loads.shape[1] != grid.n_buses:
            raise ValueError("chronics and grid disagree on the number of buses")
        self.chronics = chronics
        self.config = config or EnvConfig()
        self.done = True

    # -- state helpers -------------------------------------------------
    def _load_at(self, t):
        return float(np.sum(np.abs(self.chronics.loads[t])))

    def _observe(self) -> Observation:
        sol = self._sol
        att = None
        if self._attack is not None:
            att = (int(self.grid.line_ids[self._attack[0]]), int(self._attack[1]))
        return Observation(
            t=self.t, rho=sol.rho.copy(), flow=sol.flow.copy(),
            connected=self._conn.astype(bool), cause=tuple(self._cause),
            cooldown=self._cooldown.copy(), in_maintenance=self._maint.copy(),
            injections=self.chronics.injection(self.t), attack_active=att,
            total_load=self._load_at(self.t), line_ids=self.grid.line_ids,
            attackable=self.grid.attackable_ids,
        )

    def _open(self, i, cause):
        self._conn[i] = 0
        self._cause[i] = cause
        self._overloaded[i] = 0

    # -- public API ------------------------------------------------------
    def reset(self, seed=None) -> Observation:
        n = self.grid.n_lines
        self.t = 0
        self._conn = np.ones(n, dtype=np.uint8)
        self._cause: list[str | None] = [None] * n
        self._cooldown = np.zeros(n, dtype=np.int64)
        self._maint = np.zeros(n, dtype=bool)
        self._overloaded = np.zeros(n, dtype=np.int64)
        self._attack: tuple[int, int] | None = None
        self.done = False
        self.termination_cause = None
        for lid in self.chronics.maintenance[0]:
            i = self.grid.line_index[lid]
            self._maint[i] = True
            self._open(i, MAINTENANCE)
        sol, status = _solve(self.grid, self.chronics.injection(0), self._conn)
        self._sol = sol
        if status != _backend.kernels.OK:
            self.done = True
            self.termination_cause = BLACKOUT
            self.initial_reward = 0.0
        else:
            self._overloaded = np.where(sol.rho > 1.0, 1, 0)
            self.initial_reward = margin_reward(sol.rho, self._conn.astype(bool))
            if self.chronics.n_steps == 1:
                self.done = True
                self.termination_cause = COMPLETED
        return self._observe()

    def _apply_opponent(self, action: OpponentAction, info) -> dict | None:
        if action is None or action.kind == "do_nothing":
            return None
        lid = action.line
        i = self.grid.line_index.get(lid)
        if (action.kind != "attack" or i is None or lid not in self.grid.attackable
                or not self._conn[i] or self._attack is not None or action.duration < 1):
            info["notices"].append(f"opponent {action} rejected")
            return None
        self._open(i, OPPONENT)
        self._attack = (i, int(action.duration))
        return {"line": int(lid), "start": self.t,
                "duration": int(min(action.duration, self.chronics.n_steps - 1 - self.t))}

    def _legal_agent(self, action: AgentAction) -> bool:
        if action.kind == "do_nothing":
            return True
        i = self.grid.line_index.get(action.line)
        if i is None:
            return False
        if action.kind == "disconnect":
            return bool(self._conn[i])
        if action.kind == "reconnect":
            under_attack = self._attack is not None and self._attack[0] == i
            return (not self._conn[i] and self._cooldown[i] == 0
                    and not self._maint[i] and not under_attack)
        return False

    def _apply_agent(self, action: AgentAction, info) -> None:
        if not self._legal_agent(action):
            info["notices"].append(f"agent {action} rejected")
            return
        if action.kind == "do_nothing":
            return
        i = self.grid.line_index[action.line]
        if action.kind == "disconnect":
            self._open(i, AGENT)
            self._cooldown[i] = self.config.cooldown
        else:
            self._conn[i] = 1
            self._cause[i] = None

    def step(self, agent_action: AgentAction = DO_NOTHING,
             opponent_action: OpponentAction | None = None) -> StepOutcome:
        if self.done:
            raise StepAfterDone("episode is over; call reset()")
        info: dict = {"trips": [], "notices": [], "attack": None}
        info["attack"] = self._apply_opponent(opponent_action, info)
        self._apply_agent(agent_action or DO_NOTHING, info)

        nxt = self.chronics.maintenance[self.t + 1]
        for i, lid in enumerate(self.grid.line_ids):
            starting = int(lid) in nxt
            if starting and not self._maint[i] and self._conn[i]:
                self._open(i, MAINTENANCE)
            # lines leaving maintenance stay open until reconnected
            self._maint[i] = starting

        self.t += 1
        p = self.chronics.injection(self.t)
        sol, status = _solve(self.grid, p, self._conn)
        if status == _backend.kernels.OK:
            over = sol.rho > 1.0
            self._overloaded = np.where(over & (self._conn > 0), self._overloaded + 1, 0)
            trips = (sol.rho > self.config.hard_overflow) | (
                self._overloaded >= self.config.soft_overflow_steps)
            trips &= self._conn > 0
            if trips.any():
                for i in np.flatnonzero(trips):
                    self._open(i, OVERLOAD)
                    self._cooldown[i] = self.config.cooldown
                    info["trips"].append(int(self.grid.line_ids[i]))
                sol, status = _solve(self.grid, p, self._conn)
        self._sol = sol

        if status != _backend.kernels.OK:
            reward = 0.0
            self.done = True
            self.termination_cause = BLACKOUT
        else:
            reward = margin_reward(sol.rho, self._conn.astype(bool))
            if self.t == self.chronics.n_steps - 1:
                self.done = True
                self.termination_cause = COMPLETED

        self._cooldown = np.maximum(0, self._cooldown - 1)
        if self._attack is not None:
            i, left = self._attack
            self._attack = (i, left - 1) if left > 1 else None

        return StepOutcome(self._observe(), reward, self.done, self.termination_cause, info)

    def simulate(self, action: AgentAction) -> FlowSolution | None:
        """Flows after ``action`` at the current injections, without opponent,
        maintenance or trips. ``None`` if the action is illegal or the result
        islands load."""
        if self.done or not self._legal_agent(action):
            return None
        conn = self._conn.copy()
        if action.kind != "do_nothing":
            conn[self.grid.line_index[action.line]] = 1 if action.kind == "reconnect" else 0
        sol, status = _solve(self.grid, self.chronics.injection(self.t), conn)
        return sol if status == _backend.kernels.OK else None


# -- episodes -----------------------------------------------------------------

class Agent(Protocol):
    name: str

    def act(self, observation: Observation, env: Environment) -> AgentAction: ...


class Opponent(Protocol):
    name: str

    def reset(self, env: Environment, rng: np.random.Generator) -> None: ...

    def act(self, observation: Observation) -> OpponentAction: ...


@dataclass
class EpisodeLog:
    scenario: str
    agent: str
    opponent: str
    seed: int | None
    n_steps: int
    line_ids: list[int]
    records: list[dict] = field(default_factory=list)
    attacks: list[dict] = field(default_factory=list)
    cause: str | None = None
    total_return: float = 0.0
    steps: int = 0

    def rho_matrix(self) -> np.ndarray:
        return np.array([r["rho"] for r in self.records])

    def connected_matrix(self) -> np.ndarray:
        return np.array([r["connected"] for r in self.records], dtype=bool)

    def to_jsonl(self) -> str:
        lines = [json.dumps({
            "type": "header", "scenario": self.scenario, "agent": self.agent,
            "opponent": self.opponent, "seed": self.seed, "n_steps": self.n_steps,
            "line_ids": self.line_ids,
        })]
        for r in self.records:
            rec = dict(r)
            rec["rho"] = [round(x, 9) for x in r["rho"]]
            lines.append(json.dumps({"type": "step", **rec}))
        lines.append(json.dumps({
            "type": "footer", "cause": self.cause, "return": self.total_return,
            "steps": self.steps, "attacks": self.attacks,
        }))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> EpisodeLog:
        rows = [json.loads(s) for s in text.splitlines() if s.strip()]
        head, foot = rows[0], rows[-1]
        if head.get("type") != "header" or foot.get("type") != "footer":
            raise ValueError("episode log needs header and footer records")
        log = cls(head["scenario"], head["agent"], head["opponent"], head["seed"],
                  head["n_steps"], head["line_ids"])
        for r in rows[1:-1]:
            r = dict(r)
            r.pop("type")
            log.records.append(r)
        log.attacks = foot["attacks"]
        log.cause = foot["cause"]
        log.total_return = foot["return"]
        log.steps = foot["steps"]
        return log

    @classmethod
    def load(cls, path: str | Path) -> EpisodeLog:
        return cls.from_jsonl(Path(path).read_text())


def _record(obs: Observation, reward, agent_action, opponent_action, info) -> dict:
    return {
        "t": obs.t,
        "rho": [float(x) for x in obs.rho],
        "connected": [int(x) for x in obs.connected],
        "cause": list(obs.cause),
        "agent_action": str(agent_action) if agent_action is not None else None,
        "opponent_action": str(opponent_action) if opponent_action is not None else None,
        "reward": reward,
        "attack": info.get("attack") if info else None,
        "trips": info.get("trips", []) if info else [],
        "notices": info.get("notices", []) if info else [],
    }


def run_episode(agent: Agent, opponent: Opponent | None, grid: Grid, chronics: Chronics,
                seed: int | None = 0, config: EnvConfig | None = None,
                on_step=None) -> EpisodeLog:
    """Run one episode to termination and log every step.

    ``opponent=None`` disables the opponent entirely. ``on_step(env, obs)``
    is invoked after reset and after every step, before the next actions.
    """
    env = Environment(grid, chronics, config)
    obs = env.reset(seed)
    if opponent is not None:
        opponent.reset(env, np.random.default_rng(seed))
    log = EpisodeLog(chronics.label, getattr(agent, "name", type(agent).__name__),
                     getattr(opponent, "name", "none") if opponent is not None else "none",
                     seed, chronics.n_steps, [int(i) for i in env.grid.line_ids])
    log.records.append(_record(obs, env.initial_reward, None, None, None))
    total = env.initial_reward
    if on_step is not None:
        on_step(env, obs)
    while not env.done:
        opp_action = opponent.act(obs) if opponent is not None else NO_ATTACK
        agent_action = agent.act(obs, env)
        out = env.step(agent_action, opp_action)
        obs = out.observation
        total += out.reward
        if out.info["attack"] is not None:
            log.attacks.append(out.info["attack"])
        log.records.append(_record(obs, out.reward, agent_action, opp_action, out.info))
        if on_step is not None:
            on_step(env, obs)
    log.cause = env.termination_cause
    log.total_return = total
    # a completed episode survives every step; a blackout at t survives t
    log.steps = env.t + 1 if env.termination_cause == COMPLETED else env.t
    return log
