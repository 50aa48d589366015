"""Static network description and the DC power-flow solver.

Flows are in MW, angles in radians. Susceptances are per unit on the grid's
``base_mva``, so a line with susceptance ``b`` between angles ``ti`` and
``tj`` carries ``base_mva * b * (ti - tj)`` MW.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import _backend
from ._fallback import INJECTION_TOL
from .errors import GridError, IslandedLoad, SingularSystem


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: str
    to_bus: str
    susceptance: float
    thermal_limit: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise GridError(f"line {self.id} is a self-loop on {self.from_bus}")
        if not self.susceptance > 0:
            raise GridError(f"line {self.id}: susceptance must be positive")
        if not self.thermal_limit > 0:
            raise GridError(f"line {self.id}: thermal limit must be positive")


@dataclass(frozen=True)
class Grid:
    """Immutable grid. Array views used by the kernels are cached on first use."""

    buses: tuple[str, ...]
    slack_bus: str
    lines: tuple[Line, ...]
    attackable: frozenset[int]
    base_mva: float = 100.0
    name: str = "grid"
    # reference operating point for synthetic chronics: ((bus, MW), ...)
    base_loads: tuple[tuple[str, float], ...] = ()
    base_gens: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "attackable", frozenset(self.attackable))
        object.__setattr__(self, "base_loads", tuple((str(b), float(v)) for b, v in self.base_loads))
        object.__setattr__(self, "base_gens", tuple((str(b), float(v)) for b, v in self.base_gens))
        if len(set(self.buses)) != len(self.buses):
            raise GridError("duplicate bus ids")
        if self.slack_bus not in self.buses:
            raise GridError(f"slack bus {self.slack_bus!r} is not a bus")
        ids = [ln.id for ln in self.lines]
        if len(set(ids)) != len(ids):
            raise GridError("duplicate line ids")
        known = set(self.buses)
        for ln in self.lines:
            if ln.from_bus not in known or ln.to_bus not in known:
                raise GridError(f"line {ln.id} references an unknown bus")
        if not self.attackable:
            raise GridError("at least one attackable line is required")
        if not self.attackable <= set(ids):
            raise GridError("attackable set references unknown lines")
        if self.base_mva <= 0:
            raise GridError("base_mva must be positive")
        for bus, _ in self.base_loads + self.base_gens:
            if bus not in known:
                raise GridError(f"base case references unknown bus {bus!r}")
        labels = _backend.kernels.solve_arrays(
            self.frm, self.to, self.susceptance, np.ones(self.n_lines, np.uint8),
            np.zeros(self.n_buses), self.slack_index, self.base_mva,
        )[2]
        if not labels.all():
            raise GridError("grid is not connected with all lines in service")

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @cached_property
    def bus_index(self) -> dict[str, int]:
        return {b: i for i, b in enumerate(self.buses)}

    @cached_property
    def line_index(self) -> dict[int, int]:
        return {ln.id: i for i, ln in enumerate(self.lines)}

    @cached_property
    def line_ids(self) -> np.ndarray:
        return np.array([ln.id for ln in self.lines], dtype=np.int64)

    @cached_property
    def slack_index(self) -> int:
        return self.buses.index(self.slack_bus)

    @cached_property
    def frm(self) -> np.ndarray:
        return np.array([self.buses.index(ln.from_bus) for ln in self.lines], dtype=np.int64)

    @cached_property
    def to(self) -> np.ndarray:
        return np.array([self.buses.index(ln.to_bus) for ln in self.lines], dtype=np.int64)

    @cached_property
    def susceptance(self) -> np.ndarray:
        return np.array([ln.susceptance for ln in self.lines], dtype=np.float64)

    @cached_property
    def limits(self) -> np.ndarray:
        return np.array([ln.thermal_limit for ln in self.lines], dtype=np.float64)

    @cached_property
    def attackable_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.attackable))

    def line(self, line_id: int) -> Line:
        return self.lines[self.line_index[line_id]]

    def mask(self, connected: Iterable[int] | np.ndarray | None = None) -> np.ndarray:
        """uint8 connection mask from a set of line ids (``None`` = all)."""
        if connected is None:
            return np.ones(self.n_lines, dtype=np.uint8)
        if isinstance(connected, np.ndarray) and connected.shape == (self.n_lines,):
            return np.ascontiguousarray(connected, dtype=np.uint8)
        out = np.zeros(self.n_lines, dtype=np.uint8)
        for lid in connected:
            out[self.line_index[lid]] = 1
        return out

    def injection_vector(self, values: Mapping[str, float] | np.ndarray | Iterable[float]) -> np.ndarray:
        """Per-bus net injections (MW) in ``buses`` order."""
        if isinstance(values, Mapping):
            out = np.zeros(self.n_buses)
            for bus, mw in values.items():
                if bus not in self.bus_index:
                    raise GridError(f"unknown bus {bus!r}")
                out[self.bus_index[bus]] = mw
        else:
            out = np.asarray(values, dtype=np.float64).copy()
            if out.shape != (self.n_buses,):
                raise GridError(f"expected {self.n_buses} injections, got shape {out.shape}")
        if not np.all(np.isfinite(out)):
            raise GridError("injections must be finite")
        return out

    def with_attackable(self, extra: Iterable[int]) -> Grid:
        extra = frozenset(extra)
        if extra <= self.attackable:
            return self
        return replace(self, attackable=self.attackable | extra)

    def base_injections(self) -> np.ndarray:
        """Net injections of the reference operating point (MW)."""
        p = np.zeros(self.n_buses)
        for bus, mw in self.base_gens:
            p[self.bus_index[bus]] += mw
        for bus, mw in self.base_loads:
            p[self.bus_index[bus]] -= mw
        return p

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "buses": list(self.buses),
            "slack": self.slack_bus,
            "lines": [
                {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                 "susceptance": ln.susceptance, "limit_mw": ln.thermal_limit}
                for ln in self.lines
            ],
            "attackable": sorted(self.attackable),
            "base_case": {
                "loads": dict(self.base_loads),
                "gens": dict(self.base_gens),
            },
        }


@dataclass(frozen=True)
class FlowSolution:
    flow: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    connected: np.ndarray
    line_ids: np.ndarray = field(repr=False)
    slack_injection: float = 0.0
    islanded_buses: tuple[str, ...] = ()

    @property
    def islanded_load(self) -> bool:
        return bool(self.islanded_buses)

    def flow_of(self, grid: Grid, line_id: int) -> float:
        return float(self.flow[grid.line_index[line_id]])


def _solve(grid: Grid, p: np.ndarray, mask: np.ndarray) -> tuple[FlowSolution, int]:
    kern = _backend.kernels
    theta, flow, in_slack, status = kern.solve_arrays(
        grid.frm, grid.to, grid.susceptance, mask, p, grid.slack_index, grid.base_mva
    )
    rho = np.abs(flow) / grid.limits
    slack_inj = -float(np.sum(p[in_slack])) + float(p[grid.slack_index])
    islanded = ()
    if status == kern.ISLANDED:
        off = (~in_slack) & (np.abs(p) > INJECTION_TOL)
        islanded = tuple(grid.buses[i] for i in np.flatnonzero(off))
    sol = FlowSolution(flow=flow, theta=theta, rho=rho, connected=mask.astype(bool),
                       line_ids=grid.line_ids, slack_injection=slack_inj,
                       islanded_buses=islanded)
    return sol, status


def solve_dc(grid: Grid, injections, connected=None) -> FlowSolution:
    """DC power flow over the lines in ``connected`` (all lines if ``None``).

    The slack bus absorbs the imbalance of its component. Buses cut off from
    the slack with zero injection are tolerated; any other island raises
    :class:`IslandedLoad` carrying the slack-component solution.
    """
    p = grid.injection_vector(injections)
    sol, status = _solve(grid, p, grid.mask(connected))
    if status == _backend.kernels.SINGULAR:
        raise SingularSystem("reduced susceptance matrix is singular")
    if sol.islanded_load:
        raise IslandedLoad(
            f"buses {', '.join(sol.islanded_buses)} are islanded with nonzero injection",
            solution=sol, islanded_buses=sol.islanded_buses,
        )
    return sol


def check_overflow(sol: FlowSolution) -> set[int]:
    """Ids of lines loaded strictly above their thermal limit."""
    return {int(i) for i in sol.line_ids[sol.rho > 1.0]}


def grid_from_dict(data: Mapping) -> Grid:
    try:
        lines = [
            Line(int(d["id"]), str(d["from"]), str(d["to"]),
                 float(d["susceptance"]), float(d["limit_mw"]))
            for d in data["lines"]
        ]
        return Grid(
            buses=tuple(str(b) for b in data["buses"]),
            slack_bus=str(data["slack"]),
            lines=tuple(lines),
            attackable=frozenset(int(i) for i in data["attackable"]),
            base_mva=float(data.get("base_mva", 100.0)),
            name=str(data.get("name", "grid")),
            base_loads=tuple(data.get("base_case", {}).get("loads", {}).items()),
            base_gens=tuple(data.get("base_case", {}).get("gens", {}).items()),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise GridError(f"malformed grid description: {exc!r}") from exc


def load_grid(path: str | Path) -> Grid:
    """Load a grid JSON file, or a bundled grid via ``bundled:<name>``."""
    path = str(path)
    if path.startswith("bundled:"):
        return bundled_grid(path.split(":", 1)[1])
    with open(path) as fh:
        return grid_from_dict(json.load(fh))


def save_grid(grid: Grid, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(grid.to_dict(), fh, indent=2)
        fh.write("\n")


def bundled_grid(name: str = "ieee14") -> Grid:
    ref = resources.files("gridrobust") / "data" / f"{name}.json"
    if not ref.is_file():
        raise GridError(f"no bundled grid named {name!r}")
    return grid_from_dict(json.loads(ref.read_text()))
