"""Bundled scenario presets for the IEEE 14-bus grid."""

from __future__ import annotations

from dataclasses import replace

from .chronics import Chronics, ProfileParams, generate_chronics
from .grid import Grid

WEEK_DAYS = 7

PRESETS: dict[str, tuple[int, ProfileParams]] = {
    # moderate load with weekly maintenance outages
    "week": (0, ProfileParams(amplitude=0.5, level=0.6, solar_share=0.3)),
    # light load and no maintenance: the do-nothing agent survives the week
    "mild": (7, ProfileParams(amplitude=0.3, level=0.5, maintenance_per_week=0.0)),
    # deep daily swing with midday solar and no maintenance
    "strong_cycle": (0, ProfileParams(amplitude=0.5, level=1.1, solar_share=0.5,
                                       maintenance_per_week=0.0)),
}

SUITES: dict[str, tuple[list[int], ProfileParams]] = {
    "baseline24": (list(range(1000, 1024)), ProfileParams(amplitude=0.5, level=0.6,
                                                         solar_share=0.3)),
}


def bundled_scenario(grid: Grid, name: str) -> Chronics:
    if name not in PRESETS:
        raise KeyError(f"no bundled scenario {name!r}; choose from {sorted(PRESETS)}")
    seed, params = PRESETS[name]
    return generate_chronics(grid, seed, WEEK_DAYS, params, label=name)


def suite(grid: Grid, name: str = "baseline24") -> list[Chronics]:
    if name not in SUITES:
        raise KeyError(f"no bundled suite {name!r}; choose from {sorted(SUITES)}")
    seeds, params = SUITES[name]
    return [generate_chronics(grid, s, WEEK_DAYS, params, label=f"{name}-{i:02d}")
            for i, s in enumerate(seeds)]


def suite_params(name: str) -> tuple[list[int], ProfileParams]:
    seeds, params = SUITES[name]
    return list(seeds), replace(params)


def blackout_at_start(grid: Grid, n_steps: int = 2016) -> Chronics:
    """Constant scenario whose step-0 maintenance islands the loaded bus 14
    (both of its lines, 17 and 20, are out)."""
    p = grid.base_injections()
    return Chronics.constant(grid, p * 0.5, n_steps, label="initial_blackout",
                             maintenance={0: (17, 20)})
