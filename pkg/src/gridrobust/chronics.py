"""Scenario time series: per-step loads, generation and maintenance.

A chronics CSV has one row per step with columns ``step``, ``load_<bus>``
(MW, stored positive), ``gen_<bus>`` (MW) and ``maint`` (semicolon-separated
line ids, possibly empty).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, InfeasibleProfile, SchemaError
from .grid import Grid, _solve

STEPS_PER_HOUR_DEFAULT = 12


@dataclass(frozen=True)
class Chronics:
    """Immutable scenario. ``loads``/``gens`` are (n_steps, n_buses) MW arrays
    in the paired grid's bus order."""

    loads: np.ndarray
    gens: np.ndarray
    maintenance: tuple[frozenset[int], ...]
    label: str = "scenario"
    step_duration: float = 5.0
    load_buses: tuple[str, ...] = ()
    gen_buses: tuple[str, ...] = ()

    def __post_init__(self):
        if self.loads.ndim != 2 or self.loads.shape != self.gens.shape:
            raise ConsistencyError("loads and gens must be 2-D arrays of equal shape")
        if self.loads.shape[0] < 1:
            raise ConsistencyError("chronics need at least one step")
        if len(self.maintenance) != self.loads.shape[0]:
            raise ConsistencyError("maintenance schedule length differs from n_steps")
        self.loads.setflags(write=False)
        self.gens.setflags(write=False)

    @property
    def n_steps(self) -> int:
        return self.loads.shape[0]

    @property
    def injections(self) -> np.ndarray:
        out = self.gens - self.loads
        out.setflags(write=False)
        return out

    def injection(self, t: int) -> np.ndarray:
        return self.gens[t] - self.loads[t]

    @property
    def maintenance_lines(self) -> frozenset[int]:
        out: set[int] = set()
        for lines in self.maintenance:
            out |= lines
        return frozenset(out)

    def maintenance_windows(self) -> dict[int, list[tuple[int, int]]]:
        """Per line, inclusive (first, last) step ranges of maintenance."""
        windows: dict[int, list[tuple[int, int]]] = {}
        open_: dict[int, int] = {}
        for t, lines in enumerate(self.maintenance):
            for lid in lines - open_.keys():
                open_[lid] = t
            for lid in set(open_) - lines:
                windows.setdefault(lid, []).append((open_.pop(lid), t - 1))
        for lid, start in open_.items():
            windows.setdefault(lid, []).append((start, self.n_steps - 1))
        return {k: sorted(v) for k, v in sorted(windows.items())}

    @classmethod
    def constant(cls, grid: Grid, injections, n_steps: int, label="constant",
                 maintenance=None) -> Chronics:
        """Time-invariant scenario; positive injections become generation."""
        p = grid.injection_vector(injections)
        loads = np.tile(np.where(p < 0, -p, 0.0), (n_steps, 1))
        gens = np.tile(np.where(p > 0, p, 0.0), (n_steps, 1))
        maint = tuple(frozenset(maintenance.get(t, ())) if maintenance else frozenset()
                      for t in range(n_steps))
        return cls(loads, gens, maint, label, 5.0,
                   tuple(b for b, v in zip(grid.buses, p) if v < 0),
                   tuple(b for b, v in zip(grid.buses, p) if v > 0))

    def to_csv(self, grid: Grid) -> str:
        load_buses = self.load_buses or tuple(
            b for i, b in enumerate(grid.buses) if np.any(self.loads[:, i]))
        gen_buses = self.gen_buses or tuple(
            b for i, b in enumerate(grid.buses) if np.any(self.gens[:, i]))
        li = [grid.bus_index[b] for b in load_buses]
        gi = [grid.bus_index[b] for b in gen_buses]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", *(f"load_{b}" for b in load_buses),
                    *(f"gen_{b}" for b in gen_buses), "maint"])
        for t in range(self.n_steps):
            w.writerow([t, *(repr(float(self.loads[t, i])) for i in li),
                        *(repr(float(self.gens[t, i])) for i in gi),
                        ";".join(str(x) for x in sorted(self.maintenance[t]))])
        return buf.getvalue()

    def save(self, grid: Grid, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(grid))


def total_load(chronics: Chronics, t: int) -> float:
    """Total consumption at step ``t`` (MW, positive)."""
    if not 0 <= t < chronics.n_steps:
        raise IndexError(f"step {t} outside [0, {chronics.n_steps})")
    return float(np.sum(np.abs(chronics.loads[t])))


def load_chronics(path: str | Path, grid: Grid, label: str | None = None,
                  step_duration: float = 5.0) -> Chronics:
    path = Path(path)
    with open(path, newline="") as fh:
        return parse_chronics(fh.read(), grid, label or path.stem, step_duration)


def parse_chronics(text: str, grid: Grid, label: str = "scenario",
                   step_duration: float = 5.0) -> Chronics:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty chronics file") from None
    if not header or header[0] != "step" or header[-1] != "maint":
        raise SchemaError("header must start with 'step' and end with 'maint'")

    load_cols, gen_cols = [], []
    for j, name in enumerate(header[1:-1], start=1):
        kind, _, bus = name.partition("_")
        if kind not in ("load", "gen") or not bus:
            raise SchemaError(f"unrecognised column {name!r}")
        if bus not in grid.bus_index:
            raise ConsistencyError(f"column {name!r} references unknown bus {bus!r}")
        (load_cols if kind == "load" else gen_cols).append((j, grid.bus_index[bus], bus))

    rows = list(reader)
    if not rows:
        raise SchemaError("chronics file has no data rows")
    n = len(rows)
    loads = np.zeros((n, grid.n_buses))
    gens = np.zeros((n, grid.n_buses))
    maint = []
    for t, row in enumerate(rows, start=0):
        if len(row) != len(header):
            raise SchemaError(f"row {t + 2}: expected {len(header)} fields, got {len(row)}")
        try:
            step = int(row[0])
            for j, i, _ in load_cols:
                loads[t, i] += float(row[j])
            for j, i, _ in gen_cols:
                gens[t, i] += float(row[j])
        except ValueError as exc:
            raise SchemaError(f"row {t + 2}: {exc}") from exc
        if step != t:
            raise ConsistencyError(f"row {t + 2}: step {step} breaks the uniform 0..n-1 sequence")
        ids = set()
        for tok in filter(None, (s.strip() for s in row[-1].split(";"))):
            try:
                lid = int(tok)
            except ValueError as exc:
                raise SchemaError(f"row {t + 2}: bad line id {tok!r}") from exc
            if lid not in grid.line_index:
                raise ConsistencyError(f"row {t + 2}: unknown line {lid}")
            ids.add(lid)
        maint.append(frozenset(ids))
    if not (np.all(np.isfinite(loads)) and np.all(np.isfinite(gens))):
        raise SchemaError("non-finite values in chronics")
    if np.any(loads < 0):
        raise SchemaError("load columns must be non-negative")
    return Chronics(loads, gens, tuple(maint), label, step_duration,
                    tuple(b for _, _, b in load_cols), tuple(b for _, _, b in gen_cols))


@dataclass(frozen=True)
class ProfileParams:
    """Synthetic profile shape.

    Load at each bus is ``base * level * (1 - amplitude * (1 - c(t)) / 2)``
    where ``c`` is a daily cycle in [-1, 1] peaking at ``peak_hour`` and
    bottoming at ``trough_hour``; the peak therefore sits at ``level`` times
    the base case and the trough ``amplitude`` below it. Noise is AR(1) with
    stationary standard deviation ``noise * amplitude`` (relative).

    ``solar_share`` adds photovoltaic generation at every load bus, a
    half-sine between sunrise and sunset whose noon value is that share of
    the bus's peak load.
    """

    amplitude: float = 0.3
    level: float = 1.0
    noise: float = 0.1
    noise_corr: float = 0.9
    step_minutes: float = 5.0
    peak_hour: float = 19.0
    trough_hour: float = 4.0
    maintenance_per_week: float = 1.0
    maintenance_steps: int = 48
    solar_share: float = 0.0
    solar_sunrise: float = 6.0
    solar_sunset: float = 18.0


def daily_cycle(hours: np.ndarray, peak: float = 19.0, trough: float = 4.0) -> np.ndarray:
    """Continuous cycle, -1 at ``trough`` and +1 at ``peak`` (hours of day)."""
    h = np.mod(hours - trough, 24.0)
    rise = np.mod(peak - trough, 24.0)
    return np.where(h < rise, -np.cos(np.pi * h / rise),
                    np.cos(np.pi * (h - rise) / (24.0 - rise)))


def solar_shape(hours: np.ndarray, sunrise: float = 6.0, sunset: float = 18.0) -> np.ndarray:
    h = np.mod(hours, 24.0)
    day = (h > sunrise) & (h < sunset)
    return np.where(day, np.sin(np.pi * (h - sunrise) / (sunset - sunrise)), 0.0)


def generate_chronics(grid: Grid, seed: int, days: int = 7,
                      params: ProfileParams | None = None, label: str | None = None) -> Chronics:
    """Seeded synthetic week(s) around the grid's base case.

    Non-slack generators follow total load proportionally and the slack
    covers the residual, so every step is balanced exactly. Each attackable
    line gets Poisson(``maintenance_per_week`` * days / 7) non-overlapping
    maintenance windows.
    """
    params = params or ProfileParams()
    if days < 1:
        raise ValueError("days must be >= 1")
    if not 0 <= params.amplitude < 1:
        raise InfeasibleProfile("amplitude must lie in [0, 1)")
    if not grid.base_loads:
        raise ValueError("grid carries no base case to scale")
    rng = np.random.default_rng(seed)
    steps_per_day = int(round(24 * 60 / params.step_minutes))
    n = days * steps_per_day

    hours = np.arange(n) * params.step_minutes / 60.0
    shape = params.level * (1.0 - params.amplitude * (1.0 - daily_cycle(
        hours, params.peak_hour, params.trough_hour)) / 2.0)

    base_load = np.zeros(grid.n_buses)
    for bus, mw in grid.base_loads:
        base_load[grid.bus_index[bus]] += mw
    load_idx = np.flatnonzero(base_load)
    sd = params.noise * params.amplitude
    noise = np.zeros((n, load_idx.size))
    if sd > 0:
        phi = params.noise_corr
        eps = rng.normal(0.0, sd * math.sqrt(1 - phi * phi), size=(n, load_idx.size))
        noise[0] = rng.normal(0.0, sd, size=load_idx.size)
        for t in range(1, n):
            noise[t] = phi * noise[t - 1] + eps[t]
    loads = np.zeros((n, grid.n_buses))
    loads[:, load_idx] = np.maximum(0.0, base_load[load_idx] * (shape[:, None] + noise))

    gens = np.zeros((n, grid.n_buses))
    if params.solar_share > 0:
        gens[:, load_idx] = (params.solar_share * params.level * base_load[load_idx]
                             * solar_shape(hours, params.solar_sunrise, params.solar_sunset)[:, None])
    base_total = base_load.sum()
    total = loads.sum(axis=1)
    net = total - gens.sum(axis=1)
    slack = grid.slack_index
    for bus, mw in grid.base_gens:
        i = grid.bus_index[bus]
        if i != slack:
            gens[:, i] += mw * net / base_total
    gens[:, slack] += total - gens.sum(axis=1)

    maint = [set() for _ in range(n)]
    width = params.maintenance_steps
    rate = params.maintenance_per_week * days / 7.0
    for lid in grid.attackable_ids:
        windows: list[int] = []
        for _ in range(rng.poisson(rate)):
            for _attempt in range(100):
                start = int(rng.integers(0, max(1, n - width + 1)))
                if all(abs(start - s) >= width for s in windows):
                    windows.append(start)
                    break
        for s in windows:
            for t in range(s, min(n, s + width)):
                maint[t].add(lid)

    load_buses = tuple(grid.buses[i] for i in load_idx)
    gen_buses = tuple(b for b in grid.buses if np.any(gens[:, grid.bus_index[b]]))
    chron = Chronics(loads, gens, tuple(frozenset(m) for m in maint),
                     label or f"gen-{seed}", params.step_minutes, load_buses, gen_buses)
    _check_feasible(grid, chron)
    return chron


def _check_feasible(grid: Grid, chron: Chronics) -> None:
    mask = grid.mask()
    for t in range(chron.n_steps):
        sol, _ = _solve(grid, chron.injection(t), mask)
        if not np.any(sol.rho > 1.0):
            return
    raise InfeasibleProfile("profile overflows the intact grid at every step")
