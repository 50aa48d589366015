"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s``; the lines are also
repeated in the terminal summary.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import record_criterion
from gridrobust import load_grid, solve_dc
from gridrobust.agents import DoNothingAgent, RecoPowerlineAgent
from gridrobust.chronics import Chronics
from gridrobust.environment import COMPLETED, Environment, run_episode
from gridrobust.evaluation import (SMOOTHING_WINDOW, WeightVector, calibrate_lambda,
                                   evaluate_live, head_count, head_mass,
                                   load_reward_correlation, stability_scores, weighted_reward)
from gridrobust.harness import config_from_dict, run_batch
from gridrobust.opponent import (OpponentConfig, OpponentState, WeightedRandomOpponent,
                                 compute_alpha, delta_attack, wro_pick_line)
from gridrobust.scenarios import blackout_at_start, bundled_scenario
from oracles import dense_dc_flows, grid_lines, injection_map, lambda_bisection_oracle, \
    n1_scores_from_scratch

RATIO_TOL = 1e-10
ORACLE_LAMBDA_TOL = 1e-8
FLOW_TOL_MW = 1e-9
SIGNIFICANCE = 0.01
SCORE_TOL = 1e-9
CORRELATION_BOUND = -0.2
DELTA_SHARE_BOUND = 0.2


@pytest.fixture(scope="module")
def grid():
    return load_grid("bundled:ieee14")


def _check(number, checks, detail):
    """Record the criterion and fail on the first broken check."""
    failed = [name for name, ok in checks if not ok]
    record_criterion(number, not failed, detail if not failed else f"{detail}; failed: {', '.join(failed)}")
    assert not failed, failed


def test_criterion_1_lambda_calibration():
    t0 = time.perf_counter()
    lam = calibrate_lambda(10, 0.95, 0.2)
    elapsed = time.perf_counter() - t0
    ratio = head_mass(lam, 10, head_count(10, 0.2))
    w = np.exp(-lam * np.arange(10) / 9)
    direct = (w[0] + w[1]) / w.sum()
    oracle = lambda_bisection_oracle(10)
    _check(1, [
        ("ratio", abs(ratio - 0.95) <= RATIO_TOL and abs(direct - 0.95) <= RATIO_TOL),
        ("oracle", abs(lam - oracle) <= ORACLE_LAMBDA_TOL),
        ("runtime", elapsed < 1.0),
    ], f"lambda {lam:.12f}, ratio {direct:.15f}, oracle gap {abs(lam - oracle):.1e}, "
       f"{elapsed * 1e3:.1f} ms")


def test_criterion_2_weighted_reward_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    w = WeightVector.for_lines(10)
    total = w.total
    perm_ok = bounds_ok = mean_ok = flip_ok = True
    for _ in range(1000):
        s = rng.integers(0, 2, 10)
        r = weighted_reward(s, w)
        perm_ok &= weighted_reward(rng.permutation(s), w) == r
        bounds_ok &= s.min() * total - 1e-12 <= r <= s.max() * total + 1e-12
        mean_ok &= r / total <= s.mean() + 1e-12
        for i in np.flatnonzero(s == 0):
            up = s.copy()
            up[i] = 1
            flip_ok &= weighted_reward(up, w) > r
    elapsed = time.perf_counter() - t0
    _check(2, [("permutation", perm_ok), ("bounds", bounds_ok), ("mean", mean_ok),
               ("flip", flip_ok), ("runtime", elapsed < 5.0)],
           f"1000 vectors, {elapsed:.2f} s")


def _random_injections(grid, rng):
    """Base case with every bus scaled independently; the slack rebalances."""
    p = grid.base_injections() * rng.uniform(0.2, 1.0, grid.n_buses)
    p[grid.slack_index] -= p.sum()
    return p


def test_criterion_3_solver_oracle(grid):
    rng = np.random.default_rng(7)
    outages = grid.attackable_ids
    worst = 0.0
    scores_equal = True
    secure = 0
    for _ in range(100):
        p = _random_injections(grid, rng)
        sol = solve_dc(grid, p)
        ref = dense_dc_flows(list(grid.buses), grid.slack_bus, grid_lines(grid),
                             set(grid.line_index), injection_map(grid, p), grid.base_mva)
        worst = max(worst, float(np.max(np.abs(sol.flow - [ref[i] for i in grid.line_ids]))))
        got = stability_scores(grid, set(grid.line_index), p).tolist()
        scores_equal &= got == n1_scores_from_scratch(grid, set(grid.line_index), p, outages)
        secure += sum(got)
    mixed = 0 < secure < 100 * len(outages)
    _check(3, [("flows", worst <= FLOW_TOL_MW), ("n1 scores", scores_equal),
               ("both outcomes", mixed)],
           f"100 injections, max flow gap {worst:.1e} MW, N-1 scores identical: {scores_equal}, "
           f"{secure}/{100 * len(outages)} outages secure")


class _BudgetWatch(WeightedRandomOpponent):
    def reset(self, env, rng):
        super().reset(env, rng)
        self.min_budget = self.state.budget

    def act(self, observation):
        out = super().act(observation)
        self.min_budget = min(self.min_budget, self.state.budget)
        return out


def test_criterion_4_opponent_constraints(grid):
    ch = bundled_scenario(grid, "mild")
    attackable = set(grid.attackable_ids)
    per_period = duration_ok = budget_ok = lines_ok = True
    n_attacks = 0
    for seed in range(100):
        opp = _BudgetWatch()
        log = run_episode(RecoPowerlineAgent(), opp, grid, ch, seed=seed)
        periods = [a["start"] // 288 for a in log.attacks]
        per_period &= len(periods) == len(set(periods))
        budget_ok &= opp.min_budget >= 0
        for a in log.attacks:
            n_attacks += 1
            lines_ok &= a["line"] in attackable
            expected = min(48, ch.n_steps - 1 - a["start"])
            k = list(log.line_ids).index(a["line"])
            window = log.records[a["start"] + 1:a["start"] + 1 + 48 + 1]
            held = sum(r["cause"][k] == "opponent" for r in window)
            duration_ok &= a["duration"] == expected and held == expected
    _check(4, [("one per period", per_period), ("duration", duration_ok),
               ("budget", budget_ok), ("attackable", lines_ok), ("attacks seen", n_attacks > 0)],
           f"{n_attacks} attacks over 100 episodes")


def _draws(obs, alpha, n, seed, cfg):
    rng = np.random.default_rng(seed)
    counts = {}
    for _ in range(n):
        st = OpponentState(cfg.attack_cost, alpha=dict(alpha))
        line = wro_pick_line(obs, st, cfg, rng)
        counts[line] = counts.get(line, 0) + 1
    return counts


def test_criterion_5_wro_distribution(grid):
    cfg = OpponentConfig()
    p = grid.base_injections() * 0.5
    ch = Chronics.constant(grid, p, 20)
    obs = Environment(grid, ch).reset(seed=0)
    ids = sorted(grid.attackable_ids)
    n = 10_000

    exact = compute_alpha(grid, ch)
    uniform = _draws(obs, exact, n, 11, cfg)
    obs_counts = [uniform.get(i, 0) for i in ids]
    chi_p = chisquare(obs_counts).pvalue

    ones = {i: 1.0 for i in ids}
    prop = _draws(obs, ones, n, 12, cfg)
    rho = np.array([obs.rho[obs.index(i)] for i in ids])
    probs = rho / rho.sum()
    sigma = np.sqrt(n * probs * (1 - probs))
    dev = np.abs(np.array([prop.get(i, 0) for i in ids]) - n * probs) / sigma
    share = delta_attack(obs_counts) / n
    _check(5, [("chi-square", chi_p > SIGNIFICANCE), ("unequal rho", bool(np.ptp(rho) > 0)),
               ("proportional", bool(np.all(dev <= 3.0))),
               ("balance", share <= DELTA_SHARE_BOUND)],
           f"chi-square p {chi_p:.3f}, max deviation {dev.max():.2f} sigma, "
           f"delta share {share:.4f}")


def test_criterion_6_baseline_ordering(grid, tmp_path):
    t0 = time.perf_counter()
    cfg = config_from_dict({"scenarios": ["suite:baseline24"],
                            "agents": [{"kind": "do_nothing"}, {"kind": "reco_powerline"}],
                            "seeds": [0], "output_dir": str(tmp_path / "suite")})
    summary = run_batch(cfg)
    dn, reco = summary["agents"]["do_nothing"], summary["agents"]["reco_powerline"]
    dn_scores = [e["score"] for e in summary["episodes"] if e["agent"] == "do_nothing"]

    dead = tmp_path / "blackout_at_start.csv"
    blackout_at_start(grid).save(grid, dead)
    dead_cfg = config_from_dict({"scenarios": [str(dead)],
                                 "agents": [{"kind": "reco_powerline"}],
                                 "seeds": [0], "output_dir": str(tmp_path / "dead")})
    dead_scores = [e["score"] for e in run_batch(dead_cfg)["episodes"]]
    elapsed = time.perf_counter() - t0
    _check(6, [
        ("all scenarios ran", len(dn_scores) == 24 and not summary["failures"]),
        ("N-1 ordering", reco["mean_r_weighted"] >= dn["mean_r_weighted"]),
        ("score ordering", reco["mean_score"] >= dn["mean_score"]),
        ("anchor zero", all(abs(s) <= SCORE_TOL for s in dn_scores)),
        ("blackout -100", dead_scores == [-100.0]),
        ("runtime", elapsed < 120),
    ], f"N-1 reco {reco['mean_r_weighted']:.3f} vs do_nothing {dn['mean_r_weighted']:.3f}, "
       f"score {reco['mean_score']:.2f} vs {dn['mean_score']:.2f}, "
       f"blackout score {dead_scores}, {elapsed:.0f} s")


def test_criterion_7_load_correlation(grid):
    ch = bundled_scenario(grid, "strong_cycle")
    log, records = evaluate_live(DoNothingAgent(), grid, ch)
    corr = load_reward_correlation(records, SMOOTHING_WINDOW)
    _check(7, [("completed", log.cause == COMPLETED),
               ("sign and size", math.isfinite(corr) and corr <= CORRELATION_BOUND)],
           f"correlation {corr:.4f} over {log.steps} steps")


def _snapshot(root: Path) -> dict:
    files = {str(p.relative_to(root)): p.read_bytes()
             for p in sorted(root.rglob("*")) if p.is_file()}
    cfg = json.loads(files.pop("config.json"))
    cfg.pop("output_dir", None)
    files["config.json"] = json.dumps(cfg, sort_keys=True).encode()
    return files


def test_criterion_8_determinism(tmp_path):
    config = {
        "scenarios": ["bundled:mild",
                      {"label": "day", "generate": {"seed": 5, "days": 1, "level": 0.6}}],
        "agents": [{"kind": "do_nothing"}, {"kind": "reco_powerline"}],
        "opponent": {"kind": "weighted_random"},
        "seeds": [1, 2],
    }
    (tmp_path / "run.json").write_text(json.dumps(config))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        res = subprocess.run([sys.executable, "-m", "gridrobust.cli", "run", "--config",
                              str(tmp_path / "run.json"), "--out", str(out)],
                             capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append(_snapshot(out))
    a, b = outs
    n_logs = sum(k.startswith("episodes/") for k in a)
    _check(8, [("same files", a.keys() == b.keys()), ("same bytes", a == b),
               ("logs written", n_logs > 0)],
           f"{len(a)} files compared, {n_logs} episode logs")
