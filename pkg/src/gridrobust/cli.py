"""Command-line interface.

Exit codes: 0 on success, 1 for configuration or usage errors, 2 for
failures while running.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .chronics import ProfileParams, generate_chronics, load_chronics
from .environment import EpisodeLog
from .errors import (ConfigError, ConsistencyError, GridError, InfeasibleCalibration,
                     InfeasibleProfile, SchemaError)
from .evaluation import (WeightVector, calibrate_lambda, evaluate_episode, head_count,
                         head_mass, records_to_csv)
from .grid import load_grid
from .harness import config_from_dict, load_config, report_from_dir, run_batch
from .scenarios import PRESETS, bundled_scenario
from .scoring import ScenarioAnchors, score_episode

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
CONFIG_ERRORS = (ConfigError, SchemaError, ConsistencyError, GridError,
                 InfeasibleCalibration, InfeasibleProfile, FileNotFoundError,
                 json.JSONDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x: float) -> str:
    return f"{x + 0.0:.2f}"  # avoids printing -0.00


# -- subcommands ----------------------------------------------------------------

def cmd_gen_chronics(args) -> int:
    grid = load_grid(args.grid)
    if args.scenario:
        if args.scenario not in PRESETS:
            raise ConfigError(f"unknown bundled scenario {args.scenario!r}; choose from {sorted(PRESETS)}")
        chron = bundled_scenario(grid, args.scenario)
    else:
        overrides = {f.name: getattr(args, f.name) for f in fields(ProfileParams)
                     if getattr(args, f.name, None) is not None}
        try:
            params = ProfileParams(**overrides)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        if args.days < 1:
            raise ConfigError("--days must be at least 1")
        chron = generate_chronics(grid, args.seed, args.days, params,
                                  label=args.label or f"generated-{args.seed}")
    text = chron.to_csv(grid)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {chron.n_steps} steps to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _run_config(args):
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        base = path.parent
    else:
        data, base = {}, Path(".")
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    if args.agent:
        data["agents"] = [{"kind": k.strip()} for k in args.agent.split(",") if k.strip()]
    if args.opponent:
        data["opponent"] = {"kind": args.opponent}
    if args.seed is not None:
        data["seeds"] = [args.seed]
    if args.scenario:
        data["scenarios"] = args.scenario
    if args.stride is not None:
        data.setdefault("eval", {})["stride"] = args.stride
    if args.out:
        data["output_dir"] = args.out
    if args.workers is not None:
        data["workers"] = args.workers
    return config_from_dict(data, base)


def _print_summary(summary: dict) -> None:
    for e in summary["episodes"]:
        print(f"{e['agent']:<18} {e['scenario']:<16} seed {e['seed']:<5} steps {e['steps']:>5} "
              f"{e['cause'] or '-':<10} N-1 {e['mean_r_weighted']:.4f}  score {_fmt(e['score'])}")
    for name, a in summary["agents"].items():
        if a["mean_score"] is None:
            continue
        print(f"{name}: mean score {_fmt(a['mean_score'])}, mean N-1 reward "
              f"{a['mean_r_weighted']:.4f}, completed {a['completed']}/{a['episodes']}")
    for f in summary["failures"]:
        print(f"failed: {f['scenario']} seed {f['seed']}: {f['error']}", file=sys.stderr)


def cmd_run(args) -> int:
    config = _run_config(args)
    summary = run_batch(config)
    _print_summary(summary)
    print(f"outputs in {config.output_dir if not args.out else args.out}", file=sys.stderr)
    return EXIT_RUNTIME if summary["failures"] else EXIT_OK


def cmd_report(args) -> int:
    if args.out:
        out = Path(args.out)
    elif args.config:
        out = Path(load_config(args.config).output_dir)
    else:
        raise ConfigError("report needs --out <run directory> or --config")
    summary = report_from_dir(out)
    _print_summary(summary)
    return EXIT_RUNTIME if summary["failures"] else EXIT_OK


def cmd_evaluate(args) -> int:
    path = Path(args.episode)
    if not path.is_file():
        raise ConfigError(f"episode log not found: {path}")
    try:
        log = EpisodeLog.load(path)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: not an episode log ({exc})") from exc
    grid = load_grid(args.grid)
    if args.chronics:
        chron = load_chronics(args.chronics, grid, label=log.scenario)
    else:
        name = args.scenario or log.scenario
        if name not in PRESETS:
            raise ConfigError(f"scenario {name!r} is not bundled; pass --chronics")
        chron = bundled_scenario(grid, name)
    ids = grid.with_attackable(chron.maintenance_lines).attackable_ids
    w = WeightVector.for_lines(len(ids), args.lam)
    records = evaluate_episode(log, grid, chron, w, args.stride or 1, args.normalize)
    text = records_to_csv(records, ids)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    mean = sum(r.r_weighted for r in records) / len(records) if records else 0.0
    print(f"{len(records)} records, mean weighted N-1 reward {mean:.6f} (lambda {w.lam:.6f})",
          file=sys.stderr)
    return EXIT_OK


def cmd_score(args) -> int:
    if args.episode:
        log = EpisodeLog.load(args.episode)
        g, steps = log.total_return, log.steps
    elif args.episode_return is not None and args.steps is not None:
        g, steps = args.episode_return, args.steps
    else:
        raise ConfigError("score needs --episode or both --return and --steps")
    if args.anchor:
        a = EpisodeLog.load(args.anchor)
        anchors = ScenarioAnchors(a.total_return, a.steps, a.n_steps)
    elif None not in (args.g_dn, args.steps_dn, args.n_steps):
        anchors = ScenarioAnchors(args.g_dn, args.steps_dn, args.n_steps)
    else:
        raise ConfigError("score needs --anchor or all of --g-dn, --steps-dn, --n-steps")
    print(f"score {_fmt(score_episode(g, steps, anchors))}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.n_lines < 2:
        raise ConfigError("--n-lines must be at least 2")
    if not (0 < args.mass < 1 and 0 < args.fraction < 1):
        raise ConfigError("--mass and --fraction must lie in (0, 1)")
    lam = calibrate_lambda(args.n_lines, args.mass, args.fraction)
    m = head_count(args.n_lines, args.fraction)
    print(f"lambda {lam!r}")
    print(f"ratio {head_mass(lam, args.n_lines, m)!r} (worst {m} of {args.n_lines} scores)")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gridrobust", description="N-1 robustness evaluation of grid agents")
    p.add_argument("--version", action="version", version=f"gridrobust {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-chronics", help="write a synthetic scenario as CSV")
    g.add_argument("--grid", default="bundled:ieee14")
    g.add_argument("--scenario", help="bundled preset name instead of generator settings")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--days", type=int, default=7)
    g.add_argument("--label")
    g.add_argument("--out")
    for f in fields(ProfileParams):
        g.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default))
    g.set_defaults(func=cmd_gen_chronics)

    r = sub.add_parser("run", help="run agents over scenarios and seeds")
    r.add_argument("--config")
    r.add_argument("--agent", help="comma-separated agent kinds")
    r.add_argument("--opponent")
    r.add_argument("--seed", type=int)
    r.add_argument("--scenario", action="append",
                   help="bundled:<name>, suite:<name> or a chronics CSV; repeatable")
    r.add_argument("--stride", type=int)
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="N-1 evaluation of a saved episode")
    e.add_argument("--episode", required=True)
    e.add_argument("--grid", default="bundled:ieee14")
    e.add_argument("--chronics")
    e.add_argument("--scenario")
    e.add_argument("--stride", type=int, default=1)
    e.add_argument("--lambda", dest="lam", type=float)
    e.add_argument("--normalize", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("score", help="competition-style score of one episode")
    s.add_argument("--episode")
    s.add_argument("--anchor", help="do-nothing episode log of the same scenario")
    s.add_argument("--return", dest="episode_return", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--g-dn", type=float)
    s.add_argument("--steps-dn", type=int)
    s.add_argument("--n-steps", type=int)
    s.set_defaults(func=cmd_score)

    c = sub.add_parser("calibrate-lambda", help="decay rate of the N-1 reward weights")
    c.add_argument("--n-lines", type=int, required=True)
    c.add_argument("--mass", type=float, default=0.95)
    c.add_argument("--fraction", type=float, default=0.2)
    c.set_defaults(func=cmd_calibrate)

    rp = sub.add_parser("report", help="rebuild the report of a finished run")
    rp.add_argument("--out", help="run output directory")
    rp.add_argument("--config")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required; see --help")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
