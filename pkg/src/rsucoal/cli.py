"""Command-line driver.

Exit codes: 0 ok, 1 bad config or input, 2 formation did not converge,
3 stability violation (``verify`` only).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    ExperimentConfig,
    NonConvergenceError,
    initial_partition,
    instance_streams,
    run_dynamics,
    run_sweep,
    sample_scenario,
    write_dynamics_csv,
    write_sidecar,
    write_sweep_csv,
)
from .formation import (
    Partition,
    PartitionError,
    is_individually_stable,
    is_nash_stable,
    partition_payoffs,
    partition_value,
    run_formation,
)
from .model import Scenario, ScenarioError, save_scenario
from .oracle import PartitionSizeError, optimal_partition

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_UNSTABLE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    return data


def _experiment_config(data: dict, seed: int | None) -> ExperimentConfig:
    if seed is not None:
        data = {**data, "seed": seed}
    return ExperimentConfig.from_dict(data)


def _load_problem(path: str, seed: int | None):
    """Scenario plus formation settings from either a scenario or an experiment config."""
    data = _read_json(path)
    if "positions" in data:
        scenario = Scenario.from_dict(data)
        return scenario, Partition.singletons(scenario.n), seed or 0, 1000, None
    config = _experiment_config(data, seed)
    pos_ss, traffic_ss, order_ss = instance_streams(config.seed, 0)
    scenario = sample_scenario(config, pos_ss, traffic_rng=traffic_ss)
    return scenario, initial_partition(config, scenario.n), order_ss, config.max_rounds, config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


class _Printer:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, *parts):
        if not self.quiet:
            print(*parts)


def cmd_run(args) -> int:
    say = _Printer(args.quiet)
    scenario, start, order_seed, max_rounds, config = _load_problem(args.config, args.seed)
    root_seed = config.seed if config is not None else order_seed
    say(f"root seed: {root_seed}")
    final, trace = run_formation(scenario, start, seed=order_seed, max_rounds=max_rounds)
    out = _out_dir(args)
    save_scenario(scenario, out / "scenario.json")
    (out / "partition.txt").write_text(str(final) + "\n")
    (out / "trace.csv").write_text(trace.to_csv())
    evaluations = [scenario.game.evaluate(sum(1 << i for i in c)).to_dict() for c in
                   sorted(final.coalitions, key=min)]
    noncoop = float(scenario.game.standalone.sum())
    coop = partition_value(final, scenario)
    summary = {
        "root_seed": root_seed,
        "partition": final.canonical(),
        "converged": trace.converged,
        "rounds": trace.rounds,
        "switches": trace.total_switches,
        "total_value": coop,
        "noncoop_total": noncoop,
        "improvement_pct": 100.0 * (coop - noncoop) / noncoop if noncoop else 0.0,
        "payoffs": {str(i): p for i, p in sorted(partition_payoffs(final, scenario).items())},
        "coalitions": evaluations,
    }
    (out / "run.json").write_text(json.dumps(summary, indent=2))
    say(f"partition: {final}")
    for ev in evaluations:
        pay = ", ".join(f"{i}: {p:.6g}" for i, p in ev["payoffs"].items())
        say(f"  coalition {ev['coalition']} value {ev['value']:.6g} classes {ev['classes']} payoffs {{{pay}}}")
    say(f"switches: {trace.total_switches} in {trace.rounds} rounds; "
        f"improvement over non-cooperative: {summary['improvement_pct']:.3f}%")
    if not trace.converged:
        print(f"error: formation did not converge within {max_rounds} rounds", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_sweep(args) -> int:
    say = _Printer(args.quiet)
    config = _experiment_config(_read_json(args.config), args.seed)
    say(f"root seed: {config.seed}")
    rows = run_sweep(config, progress=lambda r: say(
        f"{r.param}={r.value:g}: coop {r.coop_mean:.4g} noncoop {r.noncoop_mean:.4g} "
        f"improvement {r.improvement_pct:.2f}% switches {r.avg_switches:.2f}"))
    out = _out_dir(args)
    write_sweep_csv(rows, out / "sweep.csv")
    write_sidecar(config, out / "sweep.json")
    return EXIT_OK


def cmd_dynamics(args) -> int:
    say = _Printer(args.quiet)
    config = _experiment_config(_read_json(args.config), args.seed)
    say(f"root seed: {config.seed}")
    periods = run_dynamics(config)
    out = _out_dir(args)
    write_dynamics_csv(periods, out / "dynamics.csv")
    write_sidecar(config, out / "dynamics.json",
                  periods=[{"period": p.period, "traffic": list(p.per_rsu_traffic),
                            "traffic_changed": p.traffic_changed, "nash_stable": p.nash_stable}
                           for p in periods])
    for p in periods:
        say(f"period {p.period}: {p.switches} switches -> {p.partition}")
    return EXIT_OK


def cmd_verify(args) -> int:
    say = _Printer(args.quiet)
    scenario = Scenario.from_dict(_read_json(args.config))
    if args.partition is None:
        raise InputError("verify needs --partition")
    try:
        text = Path(args.partition).read_text()
    except OSError as exc:
        raise InputError(f"cannot read partition file: {exc}") from None
    partition = Partition.parse(text, scenario.n)
    nash = is_nash_stable(partition, None, scenario)
    indiv = is_individually_stable(partition, scenario)
    say(f"partition: {partition}")
    say(f"nash-stable: {'yes' if nash.stable else 'no'}")
    for i, target in nash.violations:
        say(f"  RSU {i} prefers {sorted(target | {i})}")
    say(f"individually stable: {'yes' if indiv.stable else 'no'}")
    for i, target in indiv.violations:
        say(f"  RSU {i} prefers {sorted(target | {i})}")
    return EXIT_OK if nash.stable else EXIT_UNSTABLE


def cmd_oracle(args) -> int:
    say = _Printer(args.quiet)
    scenario, *_ = _load_problem(args.config, args.seed)
    best, total = optimal_partition(scenario)
    out = _out_dir(args)
    (out / "optimal.txt").write_text(str(best) + "\n")
    say(f"optimal partition: {best}")
    say(f"total value: {total:.6f} (mean payoff per RSU {total / scenario.n:.6f})")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "dynamics": cmd_dynamics,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsucoal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "form coalitions for one scenario"),
        ("sweep", "Monte-Carlo sweep over n or delta"),
        ("dynamics", "periodic re-formation under changing traffic"),
        ("verify", "check a partition for Nash and individual stability"),
        ("oracle", "exhaustive optimal partition"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario or experiment JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the root seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--quiet", action="store_true")
        if name == "verify":
            p.add_argument("--partition", help="partition file, e.g. [[0,3],[1],[2]]")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, ScenarioError, ConfigError, PartitionError, PartitionSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
