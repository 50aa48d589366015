"""N-1 robustness metric.

At each evaluated step every attackable line is removed in turn from the
current topology and the flows re-solved at the same injections. The line's
stability score is 1 when no line then exceeds its limit and no load is
islanded. Scores are aggregated three ways: plain sum, minimum, and an
exponentially weighted sum that pairs the largest weights with the lowest
scores.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend
from .chronics import Chronics
from .environment import BLACKOUT, Environment, EpisodeLog, run_episode
from .errors import InfeasibleCalibration
from .grid import Grid

CALIBRATION_TOL = 1e-10


# -- weights --------------------------------------------------------------

def weights(n_lines: int, lam: float) -> np.ndarray:
    """w_j = exp(-lam * (j - 1) / (n - 1)) for j = 1..n, so w_1 = 1."""
    if n_lines < 1:
        raise ValueError("n_lines must be >= 1")
    if n_lines == 1:
        return np.ones(1)
    j = np.arange(n_lines)
    return np.exp(-lam * j / (n_lines - 1))


def head_count(n_lines: int, fraction: float) -> int:
    # the epsilon keeps e.g. 0.2 * 15 = 3.0000000000000004 at 3
    return max(1, math.ceil(fraction * n_lines - 1e-9))


def head_mass(lam: float, n_lines: int, m: int) -> float:
    """Share of the total weight carried by the m largest weights."""
    w = weights(n_lines, lam)
    return float(w[:m].sum() / w.sum())


def calibrate_lambda(n_lines: int, mass: float = 0.95, fraction: float = 0.2) -> float:
    """Decay rate putting ``mass`` of the weight on the worst
    ``ceil(fraction * n_lines)`` scores, found by bisection.

    The head mass rises monotonically from m/n (at 0) towards 1, so the root
    is unique whenever ``mass > m/n``.
    """
    if n_lines < 2:
        raise ValueError("n_lines must be >= 2")
    if not (0 < mass < 1 and 0 < fraction < 1):
        raise ValueError("mass and fraction must lie in (0, 1)")
    m = head_count(n_lines, fraction)
    if mass <= m / n_lines:
        raise InfeasibleCalibration(
            f"mass {mass} does not exceed the uniform share {m}/{n_lines}")
    lo, hi = 0.0, 1.0
    while head_mass(hi, n_lines, m) < mass:
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise InfeasibleCalibration("no finite decay rate reaches the requested mass")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        g = head_mass(mid, n_lines, m)
        if abs(g - mass) <= CALIBRATION_TOL and hi - lo < 1e-12 * max(1.0, mid):
            break
        if g < mass:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class WeightVector:
    lam: float
    values: np.ndarray

    @property
    def n_lines(self) -> int:
        return self.values.size

    @property
    def total(self) -> float:
        return float(self.values.sum())

    @classmethod
    def for_lines(cls, n_lines: int, lam: float | None = None) -> WeightVector:
        if lam is None:
            lam = calibrate_lambda(n_lines) if n_lines >= 2 else 0.0
        return cls(float(lam), weights(n_lines, lam))


# -- rewards --------------------------------------------------------------

def weighted_reward(scores, w) -> float:
    """Largest weight on the lowest score: sorted scores dotted with w."""
    s = np.sort(np.asarray(scores, dtype=float))
    w = w.values if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    if s.shape != w.shape:
        raise ValueError(f"{s.size} scores for {w.size} weights")
    return float(np.dot(s, w))


def uniform_reward(scores) -> float:
    return float(np.sum(scores))


def worst_case_reward(scores) -> float:
    s = np.asarray(scores)
    if s.size == 0:
        raise ValueError("empty score vector")
    return float(np.min(s))


# -- stability scores -----------------------------------------------------

def stability_scores(grid: Grid, connected, injections, attackable: Sequence[int] | None = None) -> np.ndarray:
    """0/1 score per attackable line (sorted id order, or ``attackable`` order)."""
    ids = grid.attackable_ids if attackable is None else tuple(attackable)
    outages = np.array([grid.line_index[i] for i in ids], dtype=np.int64)
    p = grid.injection_vector(injections)
    return _backend.kernels.n1_scores(
        grid.frm, grid.to, grid.susceptance, grid.limits, grid.mask(connected), p,
        grid.slack_index, grid.base_mva, outages,
    ).astype(np.int64)


@dataclass(frozen=True)
class EvalRecord:
    t: int
    scores: tuple[int, ...]
    r_weighted: float
    r_uniform: float
    r_worst: float
    total_load: float
    blackout: bool = False


def evaluate_state(grid: Grid, t: int, connected, injections, w: WeightVector,
                   total_load: float, normalize: bool = False) -> EvalRecord:
    s = stability_scores(grid, connected, injections)
    rw = weighted_reward(s, w)
    if normalize:
        rw /= w.total
    return EvalRecord(t, tuple(int(x) for x in s), rw, uniform_reward(s),
                      worst_case_reward(s), total_load)


def blackout_record(t: int, n_scores: int, total_load: float) -> EvalRecord:
    """Zero-score record for a step after the grid has collapsed."""
    return EvalRecord(t, (0,) * n_scores, 0.0, 0.0, 0.0, total_load, blackout=True)


def _pad_blackout(out: list[EvalRecord], chronics: Chronics, t_blackout: int,
                  n_scores: int, stride: int) -> None:
    for t in range(t_blackout, chronics.n_steps):
        if t % stride == 0:
            out.append(blackout_record(t, n_scores, float(np.sum(chronics.loads[t]))))


def _eval_grid(grid: Grid, chronics: Chronics) -> Grid:
    return grid.with_attackable(chronics.maintenance_lines)


def weights_for(grid: Grid, chronics: Chronics, lam: float | None = None) -> WeightVector:
    return WeightVector.for_lines(len(_eval_grid(grid, chronics).attackable), lam)


def evaluate_episode(log: EpisodeLog, grid: Grid, chronics: Chronics,
                     w: WeightVector | None = None, stride: int = 1,
                     normalize: bool = False) -> list[EvalRecord]:
    """Replay the logged topologies and score every ``stride``-th step.

    Steps from a blackout onwards get zero-score records flagged ``blackout``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    g = _eval_grid(grid, chronics)
    if [int(x) for x in g.line_ids] != list(log.line_ids):
        raise ValueError("episode log and grid disagree on line order")
    w = w or WeightVector.for_lines(len(g.attackable))
    records = log.records[:-1] if log.cause == BLACKOUT else log.records
    out = []
    for r in records:
        t = r["t"]
        if t % stride:
            continue
        mask = np.array(r["connected"], dtype=np.uint8)
        out.append(evaluate_state(g, t, mask, chronics.injection(t), w,
                                  float(np.sum(chronics.loads[t])), normalize))
    if log.cause == BLACKOUT:
        _pad_blackout(out, chronics, log.records[-1]["t"], len(g.attackable), stride)
    return out


def evaluate_live(agent, grid: Grid, chronics: Chronics, w: WeightVector | None = None,
                  stride: int = 1, seed: int | None = 0, normalize: bool = False,
                  config=None) -> tuple[EpisodeLog, list[EvalRecord]]:
    """Run ``agent`` with no opponent and score states as they occur.
    Post-blackout steps are padded as in :func:`evaluate_episode`."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    g = _eval_grid(grid, chronics)
    w = w or WeightVector.for_lines(len(g.attackable))
    out: list[EvalRecord] = []

    def hook(env: Environment, obs):
        if env.termination_cause == BLACKOUT or obs.t % stride:
            return
        out.append(evaluate_state(g, obs.t, obs.connected, obs.injections, w,
                                  obs.total_load, normalize))

    log = run_episode(agent, None, grid, chronics, seed, config, on_step=hook)
    if log.cause == BLACKOUT:
        _pad_blackout(out, chronics, log.records[-1]["t"], len(g.attackable), stride)
    return log, out


# -- serialisation ----------------------------------------------------------

def records_to_csv(records: Sequence[EvalRecord], line_ids: Sequence[int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *(f"S_{i}" for i in line_ids), "r_weighted", "r_uniform",
                "r_worst", "total_load", "blackout"])
    for r in records:
        w.writerow([r.t, *r.scores, repr(r.r_weighted), repr(r.r_uniform),
                    repr(r.r_worst), repr(r.total_load), int(r.blackout)])
    return buf.getvalue()


def records_from_csv(text: str) -> tuple[list[int], list[EvalRecord]]:
    rows = list(csv.reader(io.StringIO(text)))
    head = rows[0]
    ids = [int(c[2:]) for c in head if c.startswith("S_")]
    n = len(ids)
    out = []
    for row in rows[1:]:
        out.append(EvalRecord(int(row[0]), tuple(int(x) for x in row[1:1 + n]),
                              float(row[1 + n]), float(row[2 + n]), float(row[3 + n]),
                              float(row[4 + n]),
                              bool(int(row[5 + n])) if len(row) > 5 + n else False))
    return ids, out


def overflow_probabilities(records: Sequence[EvalRecord]) -> np.ndarray:
    """Per line, the share of evaluated pre-blackout steps where its outage fails."""
    records = [r for r in records if not r.blackout]
    if not records:
        return np.zeros(0)
    s = np.array([r.scores for r in records], dtype=float)
    return 1.0 - s.mean(axis=0)


# -- analyses -----------------------------------------------------------------

SMOOTHING_WINDOW = 12  # one hour of 5-minute steps


def moving_average(x, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Centered moving average; windows shrink at the ends of the series."""
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if x.size == 0:
        return x.copy()
    c = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(x.size)
    start = idx - window // 2
    lo = np.clip(start, 0, x.size)
    hi = np.clip(start + window, 0, x.size)
    return (c[hi] - c[lo]) / (hi - lo)


def smoothed_derivative(x, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Central-difference derivative (per sample) of the smoothed series."""
    s = moving_average(x, window)
    if s.size < 2:
        return np.zeros_like(s)
    return np.gradient(s)


def load_reward_correlation(records: Sequence[EvalRecord],
                            window: int = SMOOTHING_WINDOW) -> float:
    """Pearson correlation between total load and the smoothed derivative of
    the weighted reward over pre-blackout records; NaN when undefined."""
    live = [r for r in records if not r.blackout]
    if len(live) < 3:
        return float("nan")
    load = np.array([r.total_load for r in live])
    d = smoothed_derivative([r.r_weighted for r in live], window)
    if np.std(load) == 0 or np.std(d) == 0:
        return float("nan")
    return float(np.corrcoef(load, d)[0, 1])
