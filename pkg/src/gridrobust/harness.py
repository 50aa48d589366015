"""Batch runs over (scenario, seed) pairs, scoring and report files.

A run writes every episode as JSON lines under ``episodes/`` and then builds
the report purely from those files, so ``build_report`` on a finished output
directory reproduces the run's report byte for byte.

Layout of an output directory::

    config.json                      normalised run configuration
    episodes/<agent>__<scn>__s<seed>.jsonl        episode with the opponent
    episodes/<agent>__<scn>__s<seed>__eval.jsonl  opponent-free episode
                                                  (only when an attacking
                                                  opponent is configured)
    episodes/anchor__<scn>__s<seed>.jsonl         do-nothing anchor episode
    eval/<agent>__<scn>__s<seed>.csv
    report/summary.json, matrix.csv, overflow_probs.csv, series.csv
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .agents import AGENT_KINDS, make_agent
from .chronics import Chronics, ProfileParams, generate_chronics, load_chronics
from .environment import COMPLETED, EnvConfig, EpisodeLog, run_episode
from .errors import ConfigError
from .evaluation import (EvalRecord, calibrate_lambda, evaluate_episode,
                         load_reward_correlation, overflow_probabilities, records_to_csv,
                         weights_for)
from .grid import Grid, load_grid
from .opponent import delta_attack, make_opponent
from .scenarios import PRESETS, SUITES, bundled_scenario, suite_params, WEEK_DAYS
from .scoring import ScenarioAnchors, score_episode

ATTACKING_OPPONENTS = ("weighted_random",)
_PROFILE_KEYS = {f.name for f in fields(ProfileParams)}


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSource:
    """One scenario: a bundled preset, a chronics CSV or generator settings."""

    label: str
    preset: str | None = None
    path: str | None = None
    generate: dict | None = None

    def to_dict(self) -> dict:
        out: dict = {"label": self.label}
        if self.preset is not None:
            out["preset"] = self.preset
        if self.path is not None:
            out["path"] = self.path
        if self.generate is not None:
            out["generate"] = dict(sorted(self.generate.items()))
        return out


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple[ScenarioSource, ...]
    agents: tuple[dict, ...] = ({"kind": "do_nothing"},)
    opponent: dict | None = None
    seeds: tuple[int, ...] = (0,)
    grid: str = "bundled:ieee14"
    stride: int = 1
    lam: float | None = None
    normalize: bool = False
    output_dir: str = "runs/latest"
    workers: int = 1
    env: dict = field(default_factory=dict)

    @property
    def agent_names(self) -> list[str]:
        return [agent_name(a) for a in self.agents]

    @property
    def opponent_attacks(self) -> bool:
        return self.opponent is not None and self.opponent.get("kind") in ATTACKING_OPPONENTS

    def env_config(self) -> EnvConfig:
        return replace(EnvConfig(), **self.env)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "scenarios": [s.to_dict() for s in self.scenarios],
            "agents": [dict(a) for a in self.agents],
            "opponent": self.opponent,
            "seeds": list(self.seeds),
            "eval": {"stride": self.stride,
                     "lambda": "auto" if self.lam is None else self.lam,
                     "normalize": self.normalize},
            "env": dict(self.env),
            "output_dir": self.output_dir,
            "workers": self.workers,
        }


def agent_name(spec: dict) -> str:
    return str(spec.get("name") or spec["kind"])


def _expand_scenario(item, base_dir: Path) -> list[ScenarioSource]:
    if isinstance(item, str):
        if item.startswith("bundled:"):
            name = item.split(":", 1)[1]
            if name not in PRESETS:
                raise ConfigError(f"unknown bundled scenario {name!r}; choose from {sorted(PRESETS)}")
            return [ScenarioSource(name, preset=name)]
        if item.startswith("suite:"):
            name = item.split(":", 1)[1]
            if name not in SUITES:
                raise ConfigError(f"unknown scenario suite {name!r}; choose from {sorted(SUITES)}")
            seeds, params = suite_params(name)
            gen = {k: getattr(params, k) for k in sorted(_PROFILE_KEYS)}
            return [ScenarioSource(f"{name}-{i:02d}", generate={**gen, "seed": s, "days": WEEK_DAYS})
                    for i, s in enumerate(seeds)]
        item = {"path": item}
    if not isinstance(item, dict):
        raise ConfigError(f"scenario entries must be strings or objects, got {item!r}")
    extra = set(item) - {"label", "preset", "path", "generate"}
    if extra:
        raise ConfigError(f"unknown scenario keys {sorted(extra)}")
    if sum(k in item for k in ("preset", "path", "generate")) != 1:
        raise ConfigError("a scenario needs exactly one of 'preset', 'path' or 'generate'")
    if "preset" in item:
        name = str(item["preset"])
        if name not in PRESETS:
            raise ConfigError(f"unknown bundled scenario {name!r}; choose from {sorted(PRESETS)}")
        return [ScenarioSource(str(item.get("label", name)), preset=name)]
    if "path" in item:
        path = Path(item["path"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise ConfigError(f"chronics file not found: {path}")
        return [ScenarioSource(str(item.get("label", path.stem)), path=str(path))]
    gen = dict(item["generate"])
    unknown = set(gen) - _PROFILE_KEYS - {"seed", "days"}
    if unknown:
        raise ConfigError(f"unknown generator settings {sorted(unknown)}")
    if "seed" not in gen:
        raise ConfigError("generated scenarios need a 'seed'")
    gen.setdefault("days", WEEK_DAYS)
    return [ScenarioSource(str(item.get("label", f"generated-{gen['seed']}")), generate=gen)]


def config_from_dict(data: dict, base_dir: str | Path = ".") -> RunConfig:
    """Validate a JSON run configuration; relative paths resolve against
    ``base_dir``."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    base_dir = Path(base_dir)
    known = {"grid", "scenarios", "agents", "agent", "opponent", "seeds", "seed", "eval",
             "env", "output_dir", "workers"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown configuration keys {sorted(extra)}")

    grid = str(data.get("grid", "bundled:ieee14"))
    if not grid.startswith("bundled:"):
        gpath = Path(grid) if Path(grid).is_absolute() else base_dir / grid
        if not gpath.is_file():
            raise ConfigError(f"grid file not found: {gpath}")
        grid = str(gpath)

    raw = data.get("scenarios", ["bundled:week"])
    if isinstance(raw, (str, dict)):
        raw = [raw]
    scenarios: list[ScenarioSource] = []
    for item in raw:
        scenarios.extend(_expand_scenario(item, base_dir))
    if not scenarios:
        raise ConfigError("at least one scenario is required")
    labels = [s.label for s in scenarios]
    if len(set(labels)) != len(labels):
        raise ConfigError("scenario labels must be unique")

    agents_raw = data.get("agents", data.get("agent", [{"kind": "do_nothing"}]))
    if isinstance(agents_raw, (str, dict)):
        agents_raw = [agents_raw]
    agents = []
    for a in agents_raw:
        a = {"kind": a} if isinstance(a, str) else dict(a)
        if a.get("kind") not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {a.get('kind')!r}; choose from {list(AGENT_KINDS)}")
        agents.append(a)
    names = [agent_name(a) for a in agents]
    if not agents or len(set(names)) != len(names):
        raise ConfigError("agents must be non-empty with unique names")
    if "anchor" in names:
        raise ConfigError("'anchor' is reserved")

    opp = data.get("opponent")
    if isinstance(opp, str):
        opp = {"kind": opp}
    if opp is not None:
        try:
            make_opponent(opp)
        except ValueError as exc:
            raise ConfigError(f"bad opponent: {exc}") from exc
        opp = dict(opp)

    seeds = data.get("seeds", [data["seed"]] if "seed" in data else [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds must be a non-empty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")

    ev = dict(data.get("eval", {}))
    extra = set(ev) - {"stride", "lambda", "normalize"}
    if extra:
        raise ConfigError(f"unknown eval keys {sorted(extra)}")
    stride = ev.get("stride", 1)
    if not isinstance(stride, int) or stride < 1:
        raise ConfigError("eval.stride must be a positive integer")
    lam = ev.get("lambda", "auto")
    if lam == "auto" or lam is None:
        lam = None
    elif not isinstance(lam, (int, float)) or lam < 0:
        raise ConfigError("eval.lambda must be 'auto' or a non-negative number")

    env = dict(data.get("env", {}))
    try:
        EnvConfig(**env)
    except TypeError as exc:
        raise ConfigError(f"bad env settings: {exc}") from exc

    workers = data.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")

    return RunConfig(
        scenarios=tuple(scenarios), agents=tuple(agents), opponent=opp,
        seeds=tuple(int(s) for s in seeds), grid=grid, stride=stride,
        lam=None if lam is None else float(lam), normalize=bool(ev.get("normalize", False)),
        output_dir=str(data.get("output_dir", "runs/latest")), workers=workers, env=env,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data, path.parent)


# -- scenario resolution ------------------------------------------------------

@lru_cache(maxsize=8)
def _grid(spec: str) -> Grid:
    return load_grid(spec)


def resolve_scenario(grid: Grid, source: ScenarioSource) -> Chronics:
    if source.preset is not None:
        return replace(bundled_scenario(grid, source.preset), label=source.label)
    if source.path is not None:
        return load_chronics(source.path, grid, label=source.label)
    gen = dict(source.generate)
    seed, days = int(gen.pop("seed")), int(gen.pop("days"))
    return generate_chronics(grid, seed, days, ProfileParams(**gen), label=source.label)


_CHRONICS_CACHE: dict[tuple, Chronics] = {}


def _chronics(grid_spec: str, source: ScenarioSource) -> Chronics:
    key = (grid_spec, json.dumps(source.to_dict(), sort_keys=True))
    if key not in _CHRONICS_CACHE:
        if len(_CHRONICS_CACHE) > 64:
            _CHRONICS_CACHE.clear()
        _CHRONICS_CACHE[key] = resolve_scenario(_grid(grid_spec), source)
    return _CHRONICS_CACHE[key]


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", text)


def episode_stem(agent: str, scenario: str, seed: int) -> str:
    return f"{_slug(agent)}__{_slug(scenario)}__s{seed}"


# -- execution ----------------------------------------------------------------

def _run_pair(config: RunConfig, source: ScenarioSource, seed: int) -> dict[str, str]:
    """All episodes of one (scenario, seed) pair as ``{file name: jsonl}``."""
    grid = _grid(config.grid)
    chron = _chronics(config.grid, source)
    envc = config.env_config()
    out: dict[str, str] = {}
    anchor = run_episode(make_agent("do_nothing"), make_opponent(config.opponent), grid,
                         chron, seed, envc).to_jsonl()
    out[episode_stem("anchor", source.label, seed) + ".jsonl"] = anchor
    for spec in config.agents:
        name = agent_name(spec)
        stem = episode_stem(name, source.label, seed)
        if spec["kind"] == "do_nothing":
            out[stem + ".jsonl"] = anchor
        else:
            log = run_episode(make_agent(spec), make_opponent(config.opponent), grid,
                              chron, seed, envc)
            log.agent = name
            out[stem + ".jsonl"] = log.to_jsonl()
        if config.opponent_attacks:
            log = run_episode(make_agent(spec), None, grid, chron, seed, envc)
            log.agent = name
            out[stem + "__eval.jsonl"] = log.to_jsonl()
    return out


def _run_pair_safe(args) -> tuple[dict[str, str], str | None]:
    config, source, seed = args
    try:
        return _run_pair(config, source, seed), None
    except Exception as exc:  # recorded per pair; the batch continues
        return {}, f"{type(exc).__name__}: {exc}"


def _pairs(config: RunConfig):
    return [(config, s, seed) for s in config.scenarios for seed in config.seeds]


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def run_batch(config: RunConfig, output_dir: str | Path | None = None) -> dict:
    """Run every (scenario, seed) pair, persist the logs and build the report."""
    out = Path(output_dir or config.output_dir)
    (out / "episodes").mkdir(parents=True, exist_ok=True)
    config = replace(config, output_dir=str(out))
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    failures = []
    for (cfg, source, seed), (files, err) in zip(_pairs(config),
                                                 _map(_run_pair_safe, _pairs(config), config.workers)):
        if err is not None:
            failures.append({"scenario": source.label, "seed": seed, "stage": "run", "error": err})
        for fname, text in files.items():
            (out / "episodes" / fname).write_text(text)
    (out / "report").mkdir(exist_ok=True)
    (out / "report" / "run_failures.json").write_text(json.dumps(failures, indent=2) + "\n")
    return build_report(config, out)


# -- report -------------------------------------------------------------------

@dataclass
class EpisodeResult:
    agent: str
    scenario: str
    seed: int
    steps: int
    cause: str | None
    episode_return: float
    score: float
    n_attacks: int
    delta_attack: int
    records: list[EvalRecord]

    def mean(self, attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in self.records])) if self.records else 0.0


def _finite(x: float):
    return None if x is None or not math.isfinite(x) else x


def _evaluate_pair(args) -> tuple[list[EpisodeResult], dict | None, str | None]:
    config, source, seed, out = args
    ep_dir = Path(out) / "episodes"
    try:
        grid = _grid(config.grid)
        chron = _chronics(config.grid, source)
        w = weights_for(grid, chron, config.lam)
        anchor_log = EpisodeLog.load(ep_dir / (episode_stem("anchor", source.label, seed) + ".jsonl"))
        anchors = ScenarioAnchors(anchor_log.total_return, anchor_log.steps, chron.n_steps)
        results = []
        for name in config.agent_names:
            stem = episode_stem(name, source.label, seed)
            log = EpisodeLog.load(ep_dir / (stem + ".jsonl"))
            eval_log = (EpisodeLog.load(ep_dir / (stem + "__eval.jsonl"))
                        if config.opponent_attacks else log)
            records = evaluate_episode(eval_log, grid, chron, w, config.stride, config.normalize)
            counts = {lid: 0 for lid in sorted(grid.with_attackable(chron.maintenance_lines).attackable)}
            for a in log.attacks:
                counts[a["line"]] = counts.get(a["line"], 0) + 1
            results.append(EpisodeResult(
                name, source.label, seed, log.steps, log.cause, log.total_return,
                score_episode(log.total_return, log.steps, anchors), len(log.attacks),
                delta_attack(counts) if log.attacks else 0, records))
        anchor = {"scenario": source.label, "seed": seed, **anchors.to_dict()}
        return results, anchor, None
    except Exception as exc:
        return [], None, f"{type(exc).__name__}: {exc}"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _num(x: float) -> str:
    return repr(float(x))


def build_report(config: RunConfig, output_dir: str | Path) -> dict:
    """Evaluate and score the persisted episodes of a run and write the
    report files. Depends only on the configuration and ``episodes/``."""
    out = Path(output_dir)
    jobs = [(config, s, seed, str(out)) for s in config.scenarios for seed in config.seeds]
    failures = []
    rf = out / "report" / "run_failures.json"
    if rf.is_file():
        failures.extend(json.loads(rf.read_text()))
    results: list[EpisodeResult] = []
    anchors = []
    for (_, source, seed, _), (res, anchor, err) in zip(jobs, _map(_evaluate_pair, jobs, config.workers)):
        if err is not None:
            if not any(f["scenario"] == source.label and f["seed"] == seed for f in failures):
                failures.append({"scenario": source.label, "seed": seed, "stage": "report", "error": err})
            continue
        results.extend(res)
        anchors.append(anchor)

    (out / "eval").mkdir(parents=True, exist_ok=True)
    (out / "report").mkdir(parents=True, exist_ok=True)
    grid = _grid(config.grid)
    sources = {s.label: s for s in config.scenarios}
    scored_ids: dict[str, list[int]] = {}
    for r in results:
        if r.scenario not in scored_ids:
            chron = _chronics(config.grid, sources[r.scenario])
            scored_ids[r.scenario] = list(grid.with_attackable(chron.maintenance_lines).attackable_ids)
        (out / "eval" / (episode_stem(r.agent, r.scenario, r.seed) + ".csv")).write_text(
            records_to_csv(r.records, scored_ids[r.scenario]))

    agents = config.agent_names
    scen_labels = [s.label for s in config.scenarios]

    # per-scenario mean weighted reward, averaged over seeds
    matrix_rows = [["agent", *scen_labels]]
    for a in agents:
        row = [a]
        for s in scen_labels:
            vals = [r.mean("r_weighted") for r in results if r.agent == a and r.scenario == s]
            row.append(_num(np.mean(vals)) if vals else "")
        matrix_rows.append(row)

    # overflow probability per attackable line, pooled over pre-blackout steps
    all_ids = sorted({i for ids in scored_ids.values() for i in ids})
    probs: dict[str, dict[int, float]] = {}
    for a in agents:
        fails = {i: 0.0 for i in all_ids}
        seen = {i: 0 for i in all_ids}
        for r in results:
            live = [x for x in r.records if not x.blackout]
            if r.agent != a or not live:
                continue
            p = overflow_probabilities(live)
            for i, pi in zip(scored_ids[r.scenario], p):
                fails[i] += pi * len(live)
                seen[i] += len(live)
        probs[a] = {i: fails[i] / seen[i] if seen[i] else 0.0 for i in all_ids}
    prob_rows = [["line", *agents]] + [[i, *(_num(probs[a][i]) for a in agents)] for i in all_ids]

    # per-step mean weighted reward across scenarios and seeds
    series: dict[str, dict[int, list[float]]] = {a: {} for a in agents}
    for r in results:
        for rec in r.records:
            series[r.agent].setdefault(rec.t, []).append(rec.r_weighted)
    ts = sorted({t for a in agents for t in series[a]})
    series_rows = [["t", *agents]] + [
        [t, *(_num(np.mean(series[a][t])) if t in series[a] else "" for a in agents)] for t in ts]

    episodes = []
    for r in results:
        episodes.append({
            "agent": r.agent, "scenario": r.scenario, "seed": r.seed, "steps": r.steps,
            "cause": r.cause, "return": r.episode_return, "score": r.score,
            "completed": r.cause == COMPLETED,
            "mean_r_weighted": r.mean("r_weighted"), "mean_r_uniform": r.mean("r_uniform"),
            "mean_r_worst": r.mean("r_worst"),
            "correlation": _finite(load_reward_correlation(r.records)),
            "attacks": r.n_attacks, "delta_attack": r.delta_attack,
        })
    per_agent = {}
    for a in agents:
        eps = [e for e in episodes if e["agent"] == a]
        corr = [e["correlation"] for e in eps if e["correlation"] is not None]
        per_agent[a] = {
            "episodes": len(eps),
            "completed": sum(e["completed"] for e in eps),
            "mean_score": float(np.mean([e["score"] for e in eps])) if eps else None,
            "mean_r_weighted": float(np.mean([e["mean_r_weighted"] for e in eps])) if eps else None,
            "mean_correlation": float(np.mean(corr)) if corr else None,
        }
    ns = sorted({len(ids) for ids in scored_ids.values()})
    summary = {
        "grid": config.grid,
        "opponent": config.opponent,
        "seeds": list(config.seeds),
        "stride": config.stride,
        "normalize": config.normalize,
        "lambda": {str(n): (config.lam if config.lam is not None else calibrate_lambda(n))
                   for n in ns if n >= 2},
        "agents": per_agent,
        "anchors": anchors,
        "episodes": episodes,
        "overflow_probabilities": {a: {str(i): p for i, p in probs[a].items()} for a in agents},
        "failures": failures,
    }
    (out / "report" / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "report" / "matrix.csv").write_text(_csv(matrix_rows))
    (out / "report" / "overflow_probs.csv").write_text(_csv(prob_rows))
    (out / "report" / "series.csv").write_text(_csv(series_rows))
    return summary


def report_from_dir(output_dir: str | Path) -> dict:
    """Rebuild the report of a finished run from its saved configuration."""
    out = Path(output_dir)
    cfg = out / "config.json"
    if not cfg.is_file():
        raise ConfigError(f"{out} has no config.json; not a run directory")
    return build_report(config_from_dict(json.loads(cfg.read_text()), out), out)
