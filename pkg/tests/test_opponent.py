import numpy as np
import pytest

from gridrobust.agents import DoNothingAgent, RecoPowerlineAgent
from gridrobust.chronics import Chronics
from gridrobust.environment import BLACKOUT, run_episode
from gridrobust.opponent import (ALPHA_FLOOR, DoNothingOpponent, OpponentConfig, OpponentState,
                                 WeightedRandomOpponent, compute_alpha, delta_attack,
                                 make_opponent, schedule_attack_time, tick_budget,
                                 wro_probabilities)
from gridrobust.scenarios import bundled_scenario

CFG = OpponentConfig()


def test_tick_budget():
    st = tick_budget(OpponentState(0.5), CFG)
    assert st.budget == pytest.approx(0.5 + 1 / 288)
    st = OpponentState(0.0)
    for _ in range(288):
        tick_budget(st, CFG)
    assert st.budget == pytest.approx(1.0, abs=1e-12)


def test_first_period_schedule_is_uniform():
    rng = np.random.default_rng(0)
    draws = [schedule_attack_time(OpponentState(1.0, period=0), CFG, rng) for _ in range(20000)]
    assert min(draws) == 0 and max(draws) == 287
    counts = np.bincount(np.array(draws) // 24, minlength=12)
    assert counts.min() > 0.8 * 20000 / 12


def test_schedule_respects_spacing():
    rng = np.random.default_rng(1)
    st = OpponentState(1.0, period=1, last_attack=280)
    draws = {schedule_attack_time(st, CFG, rng) for _ in range(5000)}
    assert min(draws) == 328 and max(draws) == 575


def test_schedule_empty_interval():
    cfg = OpponentConfig(d_attack=288, T_attack=288)
    st = OpponentState(1.0, period=1, last_attack=575)
    assert schedule_attack_time(st, cfg, np.random.default_rng(0)) is None
    st = OpponentState(1.0, period=3)
    assert schedule_attack_time(st, CFG, np.random.default_rng(0), horizon=800) is None


def test_wro_probabilities():
    assert wro_probabilities([0.2, 0.6], [1.0, 1.0]) == pytest.approx([0.25, 0.75])
    assert wro_probabilities([0.0, 0.0, 0.0], [1, 1, 1]) == pytest.approx([1 / 3] * 3)
    assert wro_probabilities([0.5, 0.5], [0.5, 1.0]) == pytest.approx([2 / 3, 1 / 3])


def test_delta_attack():
    assert delta_attack({1: 2, 2: 2}) == 0
    assert delta_attack([3, 1, 2]) == 2
    assert delta_attack([]) == 0


def test_alpha_constant_and_zero(grid14):
    p = grid14.base_injections() * 0.5
    ch = Chronics.constant(grid14, p, 30)
    alpha = compute_alpha(grid14, ch)
    from gridrobust import solve_dc
    rho = solve_dc(grid14, p).rho
    for lid in grid14.attackable_ids:
        assert alpha[lid] == pytest.approx(rho[grid14.line_index[lid]], rel=1e-12)
    zero = compute_alpha(grid14, Chronics.constant(grid14, np.zeros(14), 5))
    assert all(v == ALPHA_FLOOR for v in zero.values())


def test_alpha_matches_rollout_log(grid14):
    ch = bundled_scenario(grid14, "week")
    alpha = compute_alpha(grid14, ch)
    log = run_episode(DoNothingAgent(), None, grid14, ch)
    recs = log.records[:-1] if log.cause == BLACKOUT else log.records
    rho = np.array([r["rho"] for r in recs])
    conn = np.array([r["connected"] for r in recs], dtype=bool)
    for k, lid in enumerate(log.line_ids):
        if lid in alpha:
            ref = rho[conn[:, k], k].mean() if conn[:, k].any() else 0.0
            assert alpha[lid] == pytest.approx(max(ALPHA_FLOOR, ref), abs=1e-9)


def _attack_starts(log):
    return [a["start"] for a in log.attacks]


def test_wro_constraints_on_short_run(grid14):
    ch = bundled_scenario(grid14, "mild")
    for seed in range(5):
        opp = WeightedRandomOpponent()
        log = run_episode(RecoPowerlineAgent(), opp, grid14, ch, seed=seed)
        starts = _attack_starts(log)
        assert starts, seed
        periods = [s // 288 for s in starts]
        assert len(periods) == len(set(periods))
        assert all(b - a >= 48 for a, b in zip(starts, starts[1:]))
        for a in log.attacks:
            assert a["line"] in grid14.attackable
            assert a["duration"] == min(48, ch.n_steps - 1 - a["start"])
        assert opp.state.budget >= 0


def test_budget_gates_attacks(grid14):
    ch = bundled_scenario(grid14, "mild")
    opp = WeightedRandomOpponent(OpponentConfig(initial_budget=0.0))
    log = run_episode(RecoPowerlineAgent(), opp, grid14, ch, seed=0)
    # the budget reaches one attack only after 288 ticks (ticks happen at t = 0..)
    assert all(a["start"] >= 287 for a in log.attacks)


def test_do_nothing_opponent_never_attacks(grid14):
    log = run_episode(RecoPowerlineAgent(), DoNothingOpponent(), grid14,
                      bundled_scenario(grid14, "mild"))
    assert log.attacks == []


def test_make_opponent():
    assert make_opponent(None) is None
    assert make_opponent({"kind": "none"}) is None
    assert isinstance(make_opponent({"kind": "do_nothing"}), DoNothingOpponent)
    opp = make_opponent({"kind": "weighted_random", "d_attack": 24, "attackable": [2, 4]})
    assert opp.config.d_attack == 24 and opp.config.attackable == (2, 4)
    with pytest.raises(ValueError):
        make_opponent({"kind": "laser"})
    with pytest.raises(ValueError):
        make_opponent({"kind": "weighted_random", "speed": 3})
    with pytest.raises(ValueError):
        OpponentConfig(n_attack=2)
    with pytest.raises(ValueError):
        OpponentConfig(d_attack=300)
