"""Monte-Carlo sweeps and time-varying-traffic dynamics.

Every instance draws its randomness from ``SeedSequence([seed, instance])``,
split into independent streams for RSU positions, traffic and switch order.
Sweep points therefore share instances: the N-sweep adds RSUs to the same
layout and the delta-sweep replays identical networks.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .formation import (
    Partition,
    is_individually_stable,
    is_nash_stable,
    partition_payoffs,
    partition_value,
    run_formation,
)
from .model import DuplicatePolicy, Scenario, expand_per_rsu
from .oracle import MAX_N, optimal_partition

ORACLE_AUTO_LIMIT = 10
INITIAL_POLICIES = ("singletons", "grand")
ORACLE_POLICIES = ("auto", "always", "never")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, seed, instance: int | None = None):
        self.seed = seed
        self.instance = instance
        super().__init__(message)


@dataclass
class ExperimentConfig:
    n_values: list[int] = field(default_factory=lambda: [10])
    delta_values: list[float] = field(default_factory=lambda: [0.8])
    instances: int = 100
    area_km: float = 3.0
    traffic_low: int = 1
    traffic_high: int = 25
    class_weights: list[float] = field(default_factory=lambda: [0.9, 0.8, 0.7])
    alpha: float = 10.0
    beta: float = 1.0
    chunks_per_vehicle: float = 10.0
    seed: int = 0
    initial_partition: str = "singletons"
    duplicate_class_policy: str = "discount"
    oracle: str = "auto"
    max_rounds: int = 1000
    workers: int = 1
    verify_stability: bool = False
    # dynamics only
    periods: int = 5
    resample_periods: list[int] | None = None  # None: traffic changes at every period >= 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(key, msg)

        need(isinstance(self.n_values, list) and self.n_values, "n_values", "must be a non-empty list")
        need(all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in self.n_values),
             "n_values", "entries must be integers >= 1")
        need(isinstance(self.delta_values, list) and self.delta_values, "delta_values",
             "must be a non-empty list")
        need(all(isinstance(d, (int, float)) and 0 <= d <= 1 for d in self.delta_values),
             "delta_values", "entries must lie in [0, 1]")
        need(not (len(self.n_values) > 1 and len(self.delta_values) > 1), "delta_values",
             "sweep one axis at a time (n_values or delta_values)")
        need(isinstance(self.instances, int) and self.instances >= 1, "instances", "must be an integer >= 1")
        need(self.area_km > 0, "area_km", "must be > 0")
        need(isinstance(self.traffic_low, int) and isinstance(self.traffic_high, int)
             and 1 <= self.traffic_low <= self.traffic_high, "traffic_low",
             "need integers with 1 <= traffic_low <= traffic_high")
        w = self.class_weights
        need(isinstance(w, list) and w and all(0 < x <= 1 for x in w)
             and all(a > b for a, b in zip(w, w[1:])), "class_weights",
             "must be strictly decreasing values in (0, 1]")
        need(self.alpha >= 0, "alpha", "must be >= 0")
        need(self.beta > 0, "beta", "must be > 0")
        need(self.chunks_per_vehicle > 0, "chunks_per_vehicle", "must be > 0")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        need(self.initial_partition in INITIAL_POLICIES, "initial_partition",
             f"must be one of {list(INITIAL_POLICIES)}")
        need(self.duplicate_class_policy in {p.value for p in DuplicatePolicy}, "duplicate_class_policy",
             f"must be one of {[p.value for p in DuplicatePolicy]}")
        need(self.oracle in ORACLE_POLICIES, "oracle", f"must be one of {list(ORACLE_POLICIES)}")
        if self.oracle == "always":
            need(max(self.n_values) <= MAX_N, "oracle", f"exhaustive search is limited to n <= {MAX_N}")
        need(isinstance(self.max_rounds, int) and self.max_rounds >= 1, "max_rounds", "must be >= 1")
        need(isinstance(self.workers, int) and self.workers >= 1, "workers", "must be >= 1")
        need(isinstance(self.periods, int) and self.periods >= 1, "periods", "must be >= 1")
        if self.resample_periods is not None:
            need(isinstance(self.resample_periods, list)
                 and all(isinstance(p, int) and 1 <= p < self.periods for p in self.resample_periods),
                 "resample_periods", f"entries must be period indices in 1..{self.periods - 1}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown key")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError("?", str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def sweep_axis(self) -> str:
        return "delta" if len(self.delta_values) > 1 else "n"

    def points(self) -> list[tuple[int, float]]:
        return [(n, float(d)) for n in self.n_values for d in self.delta_values]

    def wants_oracle(self, n: int) -> bool:
        if self.oracle == "never":
            return False
        if self.oracle == "always":
            return True
        return n <= ORACLE_AUTO_LIMIT


# ---------------------------------------------------------------------------
# sampling

def _rng(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return np.random.default_rng(stream)


def sample_traffic(config: ExperimentConfig, n: int, rng) -> np.ndarray:
    """Per-RSU vehicle counts ``K_i``, uniform over ``traffic_low..traffic_high``."""
    return _rng(rng).integers(config.traffic_low, config.traffic_high + 1, size=n)


def sample_positions(config: ExperimentConfig, n: int, rng) -> np.ndarray:
    return _rng(rng).uniform(0.0, config.area_km, size=(n, 2))


def build_scenario(config: ExperimentConfig, positions, per_rsu, delta: float) -> Scenario:
    return Scenario(
        positions=positions,
        traffic=expand_per_rsu(per_rsu),
        chunks_per_vehicle=config.chunks_per_vehicle,
        class_weights=tuple(config.class_weights),
        beta=config.beta,
        alpha=config.alpha,
        delta=delta,
        duplicate_class_policy=config.duplicate_class_policy,
    )


def sample_scenario(config: ExperimentConfig, rng, n: int | None = None,
                    delta: float | None = None, traffic_rng=None) -> Scenario:
    """Random deployment in the square with ``K_ij = K_i`` in every direction.

    Positions are drawn from ``rng``; traffic from ``traffic_rng`` when given,
    otherwise from the same generator after the positions.
    """
    n = config.n_values[0] if n is None else n
    delta = config.delta_values[0] if delta is None else delta
    rng = _rng(rng)
    positions = sample_positions(config, n, rng)
    per_rsu = sample_traffic(config, n, rng if traffic_rng is None else traffic_rng)
    return build_scenario(config, positions, per_rsu, delta)


def instance_streams(seed: int, instance: int):
    """(positions, traffic, order) seed sequences for one Monte-Carlo instance."""
    return np.random.SeedSequence([seed, instance]).spawn(3)


def initial_partition(config: ExperimentConfig, n: int) -> Partition:
    return Partition.grand(n) if config.initial_partition == "grand" else Partition.singletons(n)


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class InstanceResult:
    instance: int
    coop: float        # mean payoff per RSU after formation
    noncoop: float
    opt: float         # nan when the oracle was not run
    mean_size: float
    max_size: int
    switches: int
    rounds: int
    # filled in only with config.verify_stability
    nash_stable: bool | None = None
    individually_stable: bool | None = None
    min_rational_margin: float | None = None


def run_instance(config: ExperimentConfig, n: int, delta: float, instance: int) -> InstanceResult:
    pos_ss, traffic_ss, order_ss = instance_streams(config.seed, instance)
    scenario = sample_scenario(config, pos_ss, n, delta, traffic_rng=traffic_ss)
    final, trace = run_formation(scenario, initial_partition(config, n), seed=order_ss,
                                 max_rounds=config.max_rounds)
    if not trace.converged:
        raise NonConvergenceError(
            f"formation did not converge within {config.max_rounds} rounds "
            f"(n={n}, delta={delta}, seed={config.seed}, instance={instance})",
            seed=[config.seed, instance], instance=instance)
    noncoop = float(scenario.game.standalone.sum()) / n
    opt = math.nan
    if config.wants_oracle(n):
        opt = optimal_partition(scenario)[1] / n
    checks = {}
    if config.verify_stability:
        payoffs = partition_payoffs(final, scenario)
        checks = dict(
            nash_stable=is_nash_stable(final, trace.history, scenario).stable,
            individually_stable=is_individually_stable(final, scenario).stable,
            min_rational_margin=min(payoffs[i] - scenario.game.standalone[i] for i in range(n)),
        )
    sizes = final.sizes()
    return InstanceResult(
        instance=instance,
        coop=partition_value(final, scenario) / n,
        noncoop=noncoop,
        opt=opt,
        mean_size=n / len(final),
        max_size=max(sizes),
        switches=trace.total_switches,
        rounds=trace.rounds,
        **checks,
    )


SWEEP_COLUMNS = ["param", "value", "coop_mean", "noncoop_mean", "opt_mean", "improvement_pct",
                 "gap_pct", "avg_size", "avg_max_size", "avg_switches", "instances"]


@dataclass(frozen=True)
class SweepMetrics:
    param: str
    value: float
    n: int
    delta: float
    coop_mean: float
    noncoop_mean: float
    opt_mean: float
    improvement_pct: float
    gap_pct: float
    avg_size: float
    avg_max_size: float
    avg_switches: float
    instances: int
    results: tuple[InstanceResult, ...] = field(default=(), repr=False, compare=False)

    @classmethod
    def aggregate(cls, param: str, n: int, delta: float, results: Sequence[InstanceResult]) -> "SweepMetrics":
        def mean(xs):
            return math.fsum(xs) / len(xs)

        coop = mean([r.coop for r in results])
        noncoop = mean([r.noncoop for r in results])
        opts = [r.opt for r in results]
        opt = math.nan if any(math.isnan(x) for x in opts) else mean(opts)
        return cls(
            param=param,
            value=n if param == "n" else delta,
            n=n,
            delta=delta,
            coop_mean=coop,
            noncoop_mean=noncoop,
            opt_mean=opt,
            improvement_pct=100.0 * (coop - noncoop) / noncoop,
            gap_pct=100.0 * (opt - coop) / opt if not math.isnan(opt) else math.nan,
            avg_size=mean([r.mean_size for r in results]),
            avg_max_size=mean([r.max_size for r in results]),
            avg_switches=mean([r.switches for r in results]),
            instances=len(results),
            results=tuple(results),
        )

    def row(self) -> list:
        return [getattr(self, c) for c in SWEEP_COLUMNS]


def _run_instance_args(args):
    return run_instance(*args)


def _map(func, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_sweep(config: ExperimentConfig, progress=None) -> list[SweepMetrics]:
    """One aggregated row per (n, delta) point, each over ``config.instances`` runs."""
    rows = []
    for n, delta in config.points():
        jobs = [(config, n, delta, k) for k in range(config.instances)]
        results = _map(_run_instance_args, jobs, config.workers)
        rows.append(SweepMetrics.aggregate(config.sweep_axis, n, delta, results))
        if progress is not None:
            progress(rows[-1])
    return rows


# ---------------------------------------------------------------------------
# dynamics

@dataclass(frozen=True)
class DynamicsPeriod:
    period: int
    partition: Partition
    switches: int
    rounds: int
    traffic_changed: bool
    nash_stable: bool
    per_rsu_traffic: tuple[int, ...]


def run_dynamics(config: ExperimentConfig, instance: int = 0) -> list[DynamicsPeriod]:
    """Re-run formation once per period, warm-starting from the last partition.

    Histories are reset at every period; traffic is redrawn at the periods in
    ``config.resample_periods`` (all of them by default).
    """
    n = config.n_values[0]
    delta = float(config.delta_values[0])
    pos_ss, traffic_ss, order_ss = instance_streams(config.seed, instance)
    positions = sample_positions(config, n, np.random.default_rng(pos_ss))
    traffic_rng = np.random.default_rng(traffic_ss)
    order_seeds = order_ss.spawn(config.periods)
    resample = set(range(1, config.periods)) if config.resample_periods is None \
        else set(config.resample_periods)

    per_rsu = sample_traffic(config, n, traffic_rng)
    partition = initial_partition(config, n)
    out = []
    for period in range(config.periods):
        changed = period in resample
        if changed:
            per_rsu = sample_traffic(config, n, traffic_rng)
        scenario = build_scenario(config, positions, per_rsu, delta)
        partition, trace = run_formation(scenario, partition, seed=order_seeds[period],
                                         max_rounds=config.max_rounds)
        if not trace.converged:
            raise NonConvergenceError(
                f"period {period} did not converge within {config.max_rounds} rounds "
                f"(seed={config.seed}, instance={instance})", seed=[config.seed, instance],
                instance=instance)
        out.append(DynamicsPeriod(
            period=period,
            partition=partition,
            switches=trace.total_switches,
            rounds=trace.rounds,
            traffic_changed=changed,
            nash_stable=is_nash_stable(partition, trace.history, scenario).stable,
            per_rsu_traffic=tuple(int(k) for k in per_rsu),
        ))
    return out


# ---------------------------------------------------------------------------
# output files

def write_sweep_csv(rows: Iterable[SweepMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow(r.row())


DYNAMICS_COLUMNS = ["period", "switches", "partition"]


def write_dynamics_csv(periods: Iterable[DynamicsPeriod], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DYNAMICS_COLUMNS)
        for p in periods:
            writer.writerow([p.period, p.switches, str(p.partition)])


def write_sidecar(config: ExperimentConfig, path: str | Path, **extra) -> None:
    doc = {"config": config.to_dict(), "root_seed": config.seed, **extra}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
