import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import two_bus
from gridrobust.agents import (AgentConfig, DoNothingAgent, GreedyLineSwitchAgent,
                               RecoPowerlineAgent, act_do_nothing, act_greedy,
                               act_reco_powerline, make_agent)
from gridrobust.chronics import Chronics
from gridrobust.environment import (DO_NOTHING, Environment, attack, disconnect, reconnect)
from gridrobust.grid import Grid, Line
from oracles import dense_dc_flows, grid_lines


def _env(grid, p, n=80):
    env = Environment(grid, Chronics.constant(grid, p, n))
    return env, env.reset()


def test_do_nothing_everywhere(grid14):
    env, obs = _env(grid14, grid14.base_injections() * 1.5, 2100)
    assert act_do_nothing(obs) == DO_NOTHING
    assert DoNothingAgent().act(obs) == DO_NOTHING


def test_reco_all_connected(grid14):
    _, obs = _env(grid14, grid14.base_injections() * 0.3)
    assert act_reco_powerline(obs) == DO_NOTHING


def _open_and_cool(env, lines):
    for lid in lines:
        env.step(disconnect(lid))
    out = None
    for _ in range(env.config.cooldown):
        out = env.step()
    return out.observation


def test_reco_lowest_id_first(grid14):
    env, _ = _env(grid14, grid14.base_injections() * 0.3)
    obs = _open_and_cool(env, [9, 4])
    assert obs.can_reconnect(4) and obs.can_reconnect(9)
    assert act_reco_powerline(obs) == reconnect(4)


def test_reco_skips_attacked_line(grid14):
    env, _ = _env(grid14, grid14.base_injections() * 0.3)
    _open_and_cool(env, [9])
    obs = env.step(DO_NOTHING, attack(4, 48)).observation
    assert act_reco_powerline(obs) == reconnect(9)


def greedy_case():
    """Slack A feeds 60 MW at B directly (line 1) and via C (lines 2, 3);
    C draws 5 MW. The series path is overloaded at 1.2."""
    lines = (Line(1, "A", "B", 10.0, 75.0), Line(2, "A", "C", 10.0, 100.0),
             Line(3, "C", "B", 10.0, (55.0 / 3) / 1.2))  # carries 55/3 MW
    g = Grid(("A", "B", "C"), "A", lines, frozenset({1, 2, 3}))
    return g, {"A": 65.0, "B": -60.0, "C": -5.0}


def test_greedy_cuts_overloaded_parallel_path():
    g, inj = greedy_case()
    env, obs = _env(g, g.injection_vector(inj))
    assert np.max(obs.rho) == pytest.approx(1.2)
    # oracle: enumerate every single-line switch
    limits = {ln.id: ln.thermal_limit for ln in g.lines}
    best = None
    for lid in (1, 2, 3):
        flows = dense_dc_flows(list(g.buses), "A", grid_lines(g), {1, 2, 3} - {lid}, inj)
        if flows is None:
            continue
        val = max(abs(flows[l]) / limits[l] for l in flows)
        if best is None or val < best[0]:
            best = (val, lid)
    assert best == (pytest.approx(0.8), 3)
    assert act_greedy(obs, env) == disconnect(3)


def test_greedy_prefers_do_nothing_on_ties(grid14):
    env, obs = _env(grid14, np.zeros(14))
    assert act_greedy(obs, env) == DO_NOTHING


def test_greedy_when_every_switch_islands_load():
    g = two_bus(limit=5.0)
    env, obs = _env(g, g.injection_vector({"A": 10.0, "B": -10.0}))
    assert obs.rho[0] == pytest.approx(2.0)
    assert act_greedy(obs, env) == DO_NOTHING


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 1.4), st.integers(0, 2**16))
def test_greedy_never_worse_than_do_nothing(grid14, scale, seed):
    rng = np.random.default_rng(seed)
    p = grid14.base_injections() * scale * rng.uniform(0.8, 1.2, 14)
    p[grid14.slack_index] -= p.sum()
    env, obs = _env(grid14, p)
    action = act_greedy(obs, env)
    chosen, base = env.simulate(action), env.simulate(DO_NOTHING)
    assert np.max(chosen.rho) <= np.max(base.rho)
    assert act_greedy(obs, env) == action  # deterministic


def test_make_agent():
    assert isinstance(make_agent("do_nothing"), DoNothingAgent)
    assert isinstance(make_agent({"kind": "reco_powerline"}), RecoPowerlineAgent)
    greedy = make_agent(AgentConfig("greedy_line_switch", {"cap": 4}))
    assert isinstance(greedy, GreedyLineSwitchAgent) and greedy.cap == 4
    assert make_agent({"kind": "greedy_line_switch", "params": {"cap": 2}}).cap == 2
    with pytest.raises(ValueError):
        make_agent("random")
