"""Problem instance and closed-form game mathematics.

RSUs are indexed ``0..n-1``. Data classes are indexed ``0..L-1`` with class 0
the highest-priority class ``c1``. Money values are in units of the price
``beta`` times weighted chunks.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import kernels

MONEY_TOL = 1e-9

ClassAssignment = dict  # RSU id -> class index (0 is c1)


class ScenarioError(ValueError):
    """Raised when a scenario violates its invariants; one line per problem."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {p}" for p in self.problems))


class DuplicatePolicy(str, enum.Enum):
    """Worth of a V2V exchange between two vehicles carrying the same class."""

    DISCOUNT = "discount"  # the duplicated class counts once
    LITERAL = "literal"    # w_b + w_b, the unguarded reading

    def worth_matrix(self, weights: np.ndarray) -> np.ndarray:
        worth = weights[:, None] + weights[None, :]
        if self is DuplicatePolicy.DISCOUNT:
            np.fill_diagonal(worth, weights)
        return worth


@dataclass(frozen=True, eq=False)
class Scenario:
    positions: np.ndarray
    traffic: np.ndarray
    chunks_per_vehicle: float
    class_weights: tuple[float, ...]
    beta: float
    alpha: float
    delta: float
    duplicate_class_policy: DuplicatePolicy = DuplicatePolicy.DISCOUNT

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64)
        traffic = np.array(self.traffic, dtype=np.float64)
        positions.setflags(write=False)
        traffic.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "traffic", traffic)
        object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))
        for name in ("chunks_per_vehicle", "beta", "alpha", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "duplicate_class_policy", DuplicatePolicy(self.duplicate_class_policy))
        problems = _scenario_problems(self)
        if problems:
            raise ScenarioError(problems)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_weights)

    @cached_property
    def game(self) -> "CoalitionGame":
        # memoised coalition values; invisible to callers of the pure functions
        return CoalitionGame(self)

    def replace(self, **changes) -> "Scenario":
        fields = dict(
            positions=self.positions,
            traffic=self.traffic,
            chunks_per_vehicle=self.chunks_per_vehicle,
            class_weights=self.class_weights,
            beta=self.beta,
            alpha=self.alpha,
            delta=self.delta,
            duplicate_class_policy=self.duplicate_class_policy,
        )
        fields.update(changes)
        return Scenario(**fields)

    def to_dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "traffic": {"matrix": self.traffic.tolist()},
            "class_weights": list(self.class_weights),
            "beta": self.beta,
            "alpha": self.alpha,
            "delta": self.delta,
            "chunks_per_vehicle": self.chunks_per_vehicle,
            "duplicate_class_policy": self.duplicate_class_policy.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        """Build a scenario from the JSON document layout.

        ``traffic`` is either ``{"matrix": [[...]]}`` or ``{"per_rsu": [...]}``;
        the latter sets ``K_ij = K_i`` for every ``j != i``.
        """
        problems = []
        required = ("positions", "traffic", "class_weights", "beta", "alpha", "delta",
                    "chunks_per_vehicle")
        for key in required:
            if key not in data:
                problems.append(f"missing key '{key}'")
        unknown = set(data) - set(required) - {"duplicate_class_policy"}
        for key in sorted(unknown):
            problems.append(f"unknown key '{key}'")
        if problems:
            raise ScenarioError(problems)

        try:
            positions = np.array(data["positions"], dtype=np.float64)
        except (TypeError, ValueError):
            raise ScenarioError(["'positions' must be an array of [x, y] pairs"]) from None
        if positions.ndim != 2 or positions.shape[1] != 2 or positions.shape[0] < 1:
            raise ScenarioError(["'positions' must be a non-empty array of [x, y] pairs"])
        n = positions.shape[0]

        traffic_doc = data["traffic"]
        if not isinstance(traffic_doc, Mapping) or len(traffic_doc) != 1 \
                or next(iter(traffic_doc)) not in ("matrix", "per_rsu"):
            raise ScenarioError(["'traffic' must be an object with exactly one of 'matrix' or 'per_rsu'"])
        try:
            if "matrix" in traffic_doc:
                traffic = np.array(traffic_doc["matrix"], dtype=np.float64)
                if traffic.shape != (n, n):
                    raise ScenarioError([f"'traffic.matrix' must be {n}x{n}, got shape {traffic.shape}"])
            else:
                per_rsu = np.array(traffic_doc["per_rsu"], dtype=np.float64)
                if per_rsu.shape != (n,):
                    raise ScenarioError([f"'traffic.per_rsu' must have {n} entries, got shape {per_rsu.shape}"])
                traffic = expand_per_rsu(per_rsu)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(["'traffic' entries must be numbers"]) from None

        scalars = {}
        for key in ("beta", "alpha", "delta", "chunks_per_vehicle"):
            value = data[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                problems.append(f"'{key}' must be a number")
            else:
                scalars[key] = float(value)
        weights = data["class_weights"]
        if not isinstance(weights, list) or not weights or \
                not all(isinstance(w, (int, float)) and not isinstance(w, bool) for w in weights):
            problems.append("'class_weights' must be a non-empty list of numbers")
        policy = data.get("duplicate_class_policy", DuplicatePolicy.DISCOUNT.value)
        if policy not in {p.value for p in DuplicatePolicy}:
            problems.append(f"'duplicate_class_policy' must be one of "
                            f"{[p.value for p in DuplicatePolicy]}, got {policy!r}")
        if problems:
            raise ScenarioError(problems)
        return cls(positions=positions, traffic=traffic, class_weights=tuple(weights),
                   duplicate_class_policy=policy, **scalars)


def _scenario_problems(s: Scenario) -> list[str]:
    problems = []
    n = s.positions.shape[0] if s.positions.ndim == 2 else 0
    if s.positions.ndim != 2 or s.positions.shape[1:] != (2,) or n < 1:
        problems.append("positions must be a non-empty (n, 2) array of km coordinates")
    if s.traffic.shape != (n, n):
        problems.append(f"traffic must be an {n}x{n} matrix")
    else:
        if not np.all(np.isfinite(s.traffic)) or np.any(s.traffic < 0):
            problems.append("traffic entries must be finite and >= 0")
        if np.any(np.diag(s.traffic) != 0):
            problems.append("traffic diagonal must be zero")
    w = s.class_weights
    if not w:
        problems.append("class_weights must not be empty")
    if any(not (0 < x <= 1) for x in w):
        problems.append("class_weights must all lie in (0, 1]")
    if any(a <= b for a, b in zip(w, w[1:])):
        problems.append("class_weights must be strictly decreasing")
    if not 0 <= s.delta <= 1:
        problems.append("delta must lie in [0, 1]")
    if not s.beta > 0:
        problems.append("beta must be > 0")
    if not s.alpha >= 0:
        problems.append("alpha must be >= 0")
    if not s.chunks_per_vehicle > 0:
        problems.append("chunks_per_vehicle must be > 0")
    return problems


def expand_per_rsu(per_rsu) -> np.ndarray:
    k = np.asarray(per_rsu, dtype=np.float64)
    traffic = np.repeat(k[:, None], k.shape[0], axis=1)
    np.fill_diagonal(traffic, 0.0)
    return traffic


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"not valid JSON: {exc}"]) from None
    if not isinstance(data, dict):
        raise ScenarioError(["top level must be a JSON object"])
    return Scenario.from_dict(data)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)


# ---------------------------------------------------------------------------
# closed-form quantities

def pairwise_distance(scenario: Scenario) -> np.ndarray:
    diff = scenario.positions[:, None, :] - scenario.positions[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def meeting_pairs(i: int, j: int, scenario: Scenario) -> float:
    """Expected number of vehicle pairs meeting between RSUs ``i`` and ``j``."""
    if i == j:
        raise ValueError(f"meeting pairs need two distinct RSUs, got {i} twice")
    d = math.dist(scenario.positions[i], scenario.positions[j])
    k = min(scenario.traffic[i, j], scenario.traffic[j, i])
    return float(scenario.delta ** d * k)


def _c1_revenue(scenario: Scenario, vehicles: float) -> float:
    return scenario.beta * scenario.class_weights[0] * scenario.chunks_per_vehicle * vehicles


def noncoop_utility(i: int, scenario: Scenario) -> float:
    """Standalone revenue of RSU ``i``: every vehicle gets class c1."""
    row = scenario.traffic[i]
    return _c1_revenue(scenario, math.fsum(row[j] for j in range(scenario.n) if j != i))


def _members(S: Iterable[int], scenario: Scenario) -> tuple[int, ...]:
    members = tuple(sorted(set(int(i) for i in S)))
    if not members:
        raise ValueError("coalition must be non-empty")
    if members[0] < 0 or members[-1] >= scenario.n:
        raise ValueError(f"coalition {members} has RSU ids outside 0..{scenario.n - 1}")
    return members


def coalition_revenue(S: Iterable[int], assignment: Mapping[int, int], scenario: Scenario) -> float:
    """Revenue of coalition ``S`` for one fixed class assignment.

    Per member: c1 revenue towards outsiders, own-class revenue from unpaired
    vehicles on internal links, and the exchanged worth for paired vehicles.
    """
    members = _members(S, scenario)
    if set(assignment) != set(members):
        raise ValueError(f"assignment covers {sorted(assignment)}, coalition is {list(members)}")
    w = scenario.class_weights
    L = len(w)
    if any(not 0 <= b < L for b in assignment.values()):
        raise ValueError(f"class indices must lie in 0..{L - 1}")
    literal = scenario.duplicate_class_policy is DuplicatePolicy.LITERAL
    P, K = scenario.chunks_per_vehicle, scenario.traffic
    inside = set(members)
    total = 0.0
    for i in members:
        bi = assignment[i]
        external = sum(K[i, j] for j in range(scenario.n) if j != i and j not in inside)
        total += external * w[0] * P
        for j in members:
            if j == i:
                continue
            bj = assignment[j]
            m = meeting_pairs(i, j, scenario)
            worth = w[bi] + w[bj] if (bi != bj or literal) else w[bi]
            total += (K[i, j] - m) * w[bi] * P + m * worth * P
    return float(scenario.beta * total)


def coalition_cost(S: Iterable[int], scenario: Scenario) -> float:
    size = len(set(S))
    if size == 0:
        raise ValueError("coalition must be non-empty")
    return scenario.alpha * size if size > 1 else 0.0


def best_assignment(S: Iterable[int], scenario: Scenario) -> tuple[ClassAssignment, float]:
    """Revenue-maximising class assignment over all ``L**|S|`` tuples.

    Ties go to the lexicographically smallest class tuple, members taken in
    ascending RSU id.
    """
    members = _members(S, scenario)
    revenue, classes = scenario.game.revenue(_mask(members))
    return dict(zip(members, classes)), revenue


@dataclass(frozen=True)
class CoalitionEvaluation:
    coalition: frozenset
    revenue: float
    cost: float
    value: float
    best_assignment: ClassAssignment
    payoffs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "coalition": sorted(self.coalition),
            "revenue": self.revenue,
            "cost": self.cost,
            "value": self.value,
            "classes": {str(i): f"c{b + 1}" for i, b in sorted(self.best_assignment.items())},
            "payoffs": {str(i): p for i, p in sorted(self.payoffs.items())},
        }


def evaluate_coalition(S: Iterable[int], scenario: Scenario) -> CoalitionEvaluation:
    members = _members(S, scenario)
    return scenario.game.evaluate(_mask(members))


# ---------------------------------------------------------------------------
# memoised evaluator

def _mask(members: Iterable[int]) -> int:
    mask = 0
    for i in members:
        mask |= 1 << i
    return mask


def mask_members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


class CoalitionGame:
    """Per-scenario cache of coalition revenues, keyed by member bitmask.

    Everything here is a deterministic function of the immutable scenario,
    so the cache never needs invalidating.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.n = scenario.n
        s = scenario
        self._weights = np.array(s.class_weights)
        self._traffic = s.traffic
        dist = pairwise_distance(s)
        meet = np.power(s.delta, dist) * np.minimum(s.traffic, s.traffic.T)
        np.fill_diagonal(meet, 0.0)
        self.meeting = meet
        self._unpaired = s.traffic - meet
        self._pair_worth = 2.0 * s.beta * s.chunks_per_vehicle * \
            s.duplicate_class_policy.worth_matrix(self._weights)
        self._unary_scale = s.beta * s.chunks_per_vehicle * self._weights
        self.standalone = np.array([noncoop_utility(i, s) for i in range(self.n)])
        self._revenue: dict[int, tuple[float, tuple[int, ...]]] = {}
        self._value: dict[int, float] = {}

    def tables(self, members: tuple[int, ...]):
        """Objective tables for :func:`kernels.assignment_search`."""
        idx = np.array(members)
        inside = set(members)
        base = 0.0
        for i in members:
            outside = math.fsum(self._traffic[i, j] for j in range(self.n)
                                if j != i and j not in inside)
            base += _c1_revenue(self.scenario, outside)
        sub = np.ix_(idx, idx)
        unary = self._unpaired[sub].sum(axis=1)[:, None] * self._unary_scale[None, :]
        pair = self.meeting[sub][:, :, None, None] * self._pair_worth[None, None, :, :]
        return np.ascontiguousarray(unary), np.ascontiguousarray(pair), base

    def revenue(self, mask: int) -> tuple[float, tuple[int, ...]]:
        hit = self._revenue.get(mask)
        if hit is None:
            members = mask_members(mask)
            unary, pair, base = self.tables(members)
            value, digits = kernels.assignment_search(unary, pair, base, MONEY_TOL)
            hit = (float(value), tuple(digits))
            self._revenue[mask] = hit
        return hit

    def value(self, mask: int) -> float:
        v = self._value.get(mask)
        if v is None:
            size = mask.bit_count()
            cost = self.scenario.alpha * size if size > 1 else 0.0
            v = self.revenue(mask)[0] - cost
            self._value[mask] = v
        return v

    def extra(self, mask: int) -> float:
        """Value above the members' standalone utilities."""
        return self.value(mask) - math.fsum(self.standalone[i] for i in mask_members(mask))

    def payoff(self, i: int, mask: int) -> float:
        return self.extra(mask) / mask.bit_count() + self.standalone[i]

    def evaluate(self, mask: int) -> CoalitionEvaluation:
        members = mask_members(mask)
        revenue, classes = self.revenue(mask)
        value = self.value(mask)
        share = self.extra(mask) / len(members)
        return CoalitionEvaluation(
            coalition=frozenset(members),
            revenue=revenue,
            cost=self.scenario.alpha * len(members) if len(members) > 1 else 0.0,
            value=value,
            best_assignment=dict(zip(members, classes)),
            payoffs={i: share + float(self.standalone[i]) for i in members},
        )
