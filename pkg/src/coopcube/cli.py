"""Command-line interface.

Subcommands: gen-space, verify, simulate, walk, analyze, serve.  Every
subcommand takes --seed.  The analyze and walk report paths write CSV
tables plus rendered figures; serve reads a JSON config file with
COOPCUBE_* environment overrides on top.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

from .agents import (
    MODEL_KINDS,
    POLICY_KINDS,
    AgentPolicy,
    PreferenceModel,
    conditions_for_space,
    run_walk,
    simulate_cohort,
    table_entry,
)
from .analysis import (
    AnalysisConfig,
    read_preferences,
    read_trials,
    report,
    write_preferences,
    write_trials,
)
from .seeding import child_rng
from .space import (
    FeatureVector,
    SpaceConfig,
    UnsatisfiableConfigError,
    all_vectors,
    generate_space,
    layer,
    load_space,
    save_space,
    verify_space,
)


def _fraction(text: str) -> Fraction:
    return Fraction(text)


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopcube",
        description="Generate game spaces, simulate cohorts, analyze datasets, serve sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-space", help="generate and verify a feature hypercube of games")
    g.add_argument("--features", type=int, choices=(3, 4), default=3)
    g.add_argument("--multiplier", type=_fraction, default=Fraction(2),
                   help="efficiency payoff multiplier, e.g. 2 or 3/2 or 1.5")
    g.add_argument("--payoff-bound", type=int, default=8)
    g.add_argument("--base-total", type=int, default=16)
    g.add_argument("--unstable-equilibria", type=int, choices=(0, 2), default=2)
    g.add_argument("--out", type=Path, default=Path("space.json"))
    _add_seed(g)

    v = sub.add_parser("verify", help="re-check every feature predicate of a space file")
    v.add_argument("space", type=Path)
    _add_seed(v)

    s = sub.add_parser("simulate", help="run a simulated cohort through the staged protocol")
    s.add_argument("--space", type=Path, required=True)
    s.add_argument("--participants", type=int, default=96)
    s.add_argument("--policy", choices=POLICY_KINDS, default="equilibrium")
    s.add_argument("--epsilon", type=float, default=0.05)
    s.add_argument("--model", choices=MODEL_KINDS, default="lexicographic")
    s.add_argument("--order", default="stability,efficiency,fairness",
                   help="feature priority for the lexicographic model")
    s.add_argument("--table", type=Path, default=None,
                   help="JSON preference table for the empirical model")
    s.add_argument("--rounds", type=int, default=6)
    s.add_argument("--out-dir", type=Path, default=Path("data"))
    _add_seed(s)

    w = sub.add_parser("walk", help="run preference walks over the feature hypercube")
    w.add_argument("--space", type=Path, required=True)
    w.add_argument("--model", choices=MODEL_KINDS, default="lexicographic")
    w.add_argument("--order", default="stability,efficiency,fairness")
    w.add_argument("--table", type=Path, default=None)
    w.add_argument("--starts", default="all", help="'all' or comma-separated labels")
    w.add_argument("--max-steps", type=int, default=16)
    w.add_argument("--acceptance", choices=("draw", "strict_majority"), default="draw")
    w.add_argument("--threshold", type=float, default=0.5)
    w.add_argument("--out-dir", type=Path, default=None,
                   help="write walks.csv and the attractor figure here")
    _add_seed(w)

    a = sub.add_parser("analyze", help="compute the full report from datasets")
    a.add_argument("--trials", type=Path, required=True)
    a.add_argument("--preferences", type=Path, required=True)
    a.add_argument("--space", type=Path, required=True)
    a.add_argument("--bootstrap", type=int, default=10_000)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--cooperation-mode", choices=("any_nonzero", "both_nonzero"),
                   default="any_nonzero")
    a.add_argument("--out-dir", type=Path, default=Path("report"))
    _add_seed(a)

    r = sub.add_parser("serve", help="run the session service")
    r.add_argument("--config", type=Path, default=None, help="JSON config file")
    r.add_argument("--space", type=Path, default=None)
    r.add_argument("--data-dir", type=Path, default=None)
    r.add_argument("--port", type=int, default=None)
    r.add_argument("--host", default="127.0.0.1")
    r.add_argument("--rounds-per-stage", type=int, default=None)
    r.add_argument("--multiplier", type=_fraction, default=None,
                   help="used when generating a default space on the fly")
    _add_seed(r)

    return parser


def _load_table(path: Path) -> dict:
    """Preference table file: {"LOW->HIGH": p} or {"LOW->HIGH": [p, lo, hi]}."""
    raw = json.loads(path.read_text())
    table = {}
    for key, value in raw.items():
        low, _, high = key.partition("->")
        if not high:
            raise SystemExit(f"bad table key {key!r}: expected 'LOW->HIGH'")
        if isinstance(value, (int, float)):
            table[(low, high)] = table_entry(float(value))
        else:
            p, lo, hi = value
            table[(low, high)] = table_entry(float(p), float(lo), float(hi))
    return table


def _build_model(args) -> PreferenceModel:
    order = tuple(part.strip() for part in args.order.split(",") if part.strip())
    table = _load_table(args.table) if args.table else {}
    if args.model == "empirical" and not table:
        raise SystemExit("--model empirical requires --table")
    return PreferenceModel(kind=args.model, order=order, table=table)


def cmd_gen_space(args) -> int:
    config = SpaceConfig(
        feature_count=args.features,
        efficiency_multiplier=args.multiplier,
        payoff_bound=args.payoff_bound,
        base_total=args.base_total,
        rng_seed=args.seed,
        unstable_equilibria=args.unstable_equilibria,
    )
    try:
        space = generate_space(config)
    except UnsatisfiableConfigError as e:
        print(f"unsatisfiable: {e}", file=sys.stderr)
        return 1
    check = verify_space(space)
    for line in check.lines():
        print(line)
    if not check.ok:
        return 1
    save_space(space, args.out)
    print(f"wrote {len(space.games)} games to {args.out}")
    return 0


def cmd_verify(args) -> int:
    check = verify_space(load_space(args.space))
    for line in check.lines():
        print(line)
    print("ok" if check.ok else f"{len(check.failures)} failing vertices")
    return 0 if check.ok else 1


def cmd_simulate(args) -> int:
    space = load_space(args.space)
    policy = AgentPolicy(kind=args.policy, epsilon=args.epsilon)
    model = _build_model(args)
    conditions = conditions_for_space(space)
    trials, preferences = simulate_cohort(
        space, conditions, args.participants, policy, model,
        rounds_per_stage=args.rounds, seed=args.seed,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_trials(trials, args.out_dir / "trials.csv")
    write_preferences(preferences, args.out_dir / "preferences.csv")
    print(f"{args.participants} participants, {len(trials)} trials, "
          f"{len(preferences)} preferences -> {args.out_dir}")
    return 0


def cmd_walk(args) -> int:
    space = load_space(args.space)
    model = _build_model(args)
    if args.starts == "all":
        starts = all_vectors(space.config.feature_count)
    else:
        starts = [FeatureVector.from_string(s.strip()) for s in args.starts.split(",")]
    rows = []
    attractors: Counter = Counter()
    for start in starts:
        result = run_walk(
            space, start, model, args.max_steps,
            child_rng(args.seed, "walk", str(start)),
            acceptance=args.acceptance, threshold=args.threshold,
        )
        trajectory = ">".join(str(v) for v in result.trajectory)
        rows.append([str(start), str(result.attractor), result.steps,
                     result.absorbed, trajectory])
        attractors[str(result.attractor)] += 1
        print(f"{start}: {trajectory} ({'absorbed' if result.absorbed else 'cut off'})")
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        with open(args.out_dir / "walks.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["start", "attractor", "steps", "absorbed", "trajectory"])
            writer.writerows(rows)
        from .figures import attractor_figure

        fig = attractor_figure(dict(attractors))
        fig.savefig(args.out_dir / "attractors.png", dpi=150)
        print(f"wrote walks.csv and attractors.png to {args.out_dir}")
    return 0


def _write_report_tables(doc: dict, out_dir: Path) -> None:
    with open(out_dir / "cooperation.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["game_label", "layer", "value", "ci_low", "ci_high", "n"])
        for label, est in sorted(doc["cooperation"].items()):
            writer.writerow([
                label, layer(FeatureVector.from_string(label)),
                est["value"], est["ci_low"], est["ci_high"], est["n"],
            ])
    with open(out_dir / "preference.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["low", "high", "value", "ci_low", "ci_high", "n"])
        for key, est in sorted(doc["preference"].items()):
            low, _, high = key.partition("->")
            writer.writerow([low, high, est["value"], est["ci_low"], est["ci_high"], est["n"]])
    with open(out_dir / "paths.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "step", "low", "high", "value", "ci_low", "ci_high",
                         "flag", "lock_in_prone"])
        for path_doc in doc["paths"]:
            name = ">".join(path_doc["path"])
            for i, step in enumerate(path_doc["steps"]):
                est = step["estimate"] or {}
                writer.writerow([
                    name, i, step["low"], step["high"],
                    est.get("value", ""), est.get("ci_low", ""), est.get("ci_high", ""),
                    step["flag"], path_doc["lock_in_prone"],
                ])


def cmd_analyze(args) -> int:
    space = load_space(args.space)
    trials = read_trials(args.trials)
    preferences = read_preferences(args.preferences)
    config = AnalysisConfig(
        bootstrap_samples=args.bootstrap,
        alpha=args.alpha,
        seed=args.seed,
        cooperation_mode=args.cooperation_mode,
    )
    doc = report(trials, preferences, space, config)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _write_report_tables(doc, args.out_dir)
    from .figures import save_report_figures

    figures = save_report_figures(doc, args.out_dir)
    counts = doc["counts"]
    print(f"participants={counts['participants']} choosers={counts['choosers']} "
          f"trials_total={counts['trials_total']} analyzed={counts['trials_analyzed']}")
    print(f"wrote report.json, 3 CSV tables, {len(figures)} figures to {args.out_dir}")
    return 0


def _serve_settings(args) -> dict:
    settings = {
        "space": None,
        "data_dir": "coopcube-data",
        "port": 8000,
        "seed": 0,
        "rounds_per_stage": 6,
        "multiplier": "2",
    }
    if args.config is not None:
        settings.update(json.loads(args.config.read_text()))
    env_map = {
        "COOPCUBE_SPACE": "space",
        "COOPCUBE_DATA_DIR": "data_dir",
        "COOPCUBE_PORT": "port",
        "COOPCUBE_SEED": "seed",
        "COOPCUBE_ROUNDS_PER_STAGE": "rounds_per_stage",
        "COOPCUBE_MULTIPLIER": "multiplier",
    }
    for env, key in env_map.items():
        if env in os.environ:
            settings[key] = os.environ[env]
    for key, flag in (
        ("space", args.space),
        ("data_dir", args.data_dir),
        ("port", args.port),
        ("rounds_per_stage", args.rounds_per_stage),
        ("multiplier", args.multiplier),
    ):
        if flag is not None:
            settings[key] = flag
    if args.seed != 0 or "seed" not in settings:
        settings["seed"] = args.seed
    settings["port"] = int(settings["port"])
    settings["seed"] = int(settings["seed"])
    settings["rounds_per_stage"] = int(settings["rounds_per_stage"])
    settings["multiplier"] = Fraction(str(settings["multiplier"]))
    return settings


def build_engine(settings: dict):
    """Engine for `serve`: load the space or generate the default one."""
    from .engine import Engine, EngineConfig
    from .eventlog import EventLog

    if settings["space"]:
        space = load_space(Path(settings["space"]))
    else:
        space = generate_space(
            SpaceConfig(efficiency_multiplier=settings["multiplier"], rng_seed=settings["seed"])
        )
    data_dir = Path(settings["data_dir"])
    data_dir.mkdir(parents=True, exist_ok=True)
    log = EventLog(data_dir / "events.jsonl")
    config = EngineConfig(rounds_per_stage=settings["rounds_per_stage"], seed=settings["seed"])
    return Engine(space, config=config, log=log)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    settings = _serve_settings(args)
    engine = build_engine(settings)
    app = create_app(engine)
    print(f"serving on {args.host}:{settings['port']} "
          f"(data dir: {settings['data_dir']}, {len(engine.games)} games)")
    uvicorn.run(app, host=args.host, port=settings["port"], log_level="warning")
    return 0


COMMANDS = {
    "gen-space": cmd_gen_space,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "walk": cmd_walk,
    "analyze": cmd_analyze,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SystemExit:
        raise
    except KeyboardInterrupt:
        return 130
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
