"""Switch-operation coalition formation with visit history.

An RSU leaves its coalition for another coalition of the current partition
(or to act alone) when that strictly raises its egalitarian payoff, the
destination members do not lose, and it has not left that exact coalition
before.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .model import Scenario

JOINING = "joining"
STAYING = "staying"


class PartitionError(ValueError):
    pass


def _fmt(members: Iterable[int]) -> str:
    return "[" + ",".join(str(i) for i in sorted(members)) + "]"


def _mask(members: Iterable[int]) -> int:
    m = 0
    for i in members:
        m |= 1 << i
    return m


class Partition:
    """Disjoint cover of ``range(n)`` by non-empty coalitions.

    Coalition order is kept (new singletons are appended, emptied coalitions
    dropped) but equality ignores it. Instances are never mutated.
    """

    __slots__ = ("coalitions", "n", "_where")

    def __init__(self, coalitions: Iterable[Iterable[int]], n: int | None = None):
        blocks = tuple(frozenset(int(i) for i in c) for c in coalitions)
        where: dict[int, int] = {}
        for pos, block in enumerate(blocks):
            if not block:
                raise PartitionError("partition contains an empty coalition")
            for i in block:
                if i in where:
                    raise PartitionError(f"RSU {i} appears in more than one coalition")
                where[i] = pos
        if n is None:
            n = len(where)
        if set(where) != set(range(n)):
            missing = sorted(set(range(n)) - set(where))
            extra = sorted(set(where) - set(range(n)))
            detail = []
            if missing:
                detail.append(f"missing RSUs {missing}")
            if extra:
                detail.append(f"unknown RSUs {extra}")
            raise PartitionError(f"partition does not cover 0..{n - 1}: " + ", ".join(detail))
        self.coalitions = blocks
        self.n = n
        self._where = where

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls([[i] for i in range(n)], n)

    @classmethod
    def grand(cls, n: int) -> "Partition":
        return cls([range(n)], n)

    @classmethod
    def from_rgs(cls, rgs: Iterable[int]) -> "Partition":
        blocks: dict[int, list[int]] = {}
        for i, b in enumerate(rgs):
            blocks.setdefault(b, []).append(i)
        return cls([blocks[b] for b in sorted(blocks)])

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "Partition":
        """Read the canonical ``[[0,3],[1],[2,4,5]]`` form (any JSON nesting of ints)."""
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PartitionError(f"cannot parse partition: {exc}") from None
        if not isinstance(data, list) or not all(
                isinstance(c, list) and all(isinstance(i, int) and not isinstance(i, bool) for i in c)
                for c in data):
            raise PartitionError("partition must be a list of lists of RSU ids")
        return cls(data, n)

    def coalition_of(self, i: int) -> frozenset:
        return self.coalitions[self._where[i]]

    def canonical(self) -> list[list[int]]:
        return sorted(sorted(c) for c in self.coalitions)

    def __str__(self) -> str:
        return "[" + ",".join(_fmt(c) for c in self.canonical()) + "]"

    def __repr__(self) -> str:
        return f"Partition({self})"

    def __len__(self) -> int:
        return len(self.coalitions)

    def __iter__(self) -> Iterator[frozenset]:
        return iter(self.coalitions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n == other.n and set(self.coalitions) == set(other.coalitions)

    def __hash__(self) -> int:
        return hash(frozenset(self.coalitions))

    def sizes(self) -> list[int]:
        return [len(c) for c in self.coalitions]


class History:
    """Coalitions (size >= 2, owner included) each RSU has joined and left."""

    __slots__ = ("_entries",)

    def __init__(self, entries: dict[int, tuple[frozenset, ...]] | None = None):
        self._entries = dict(entries or {})

    def of(self, i: int) -> tuple[frozenset, ...]:
        return self._entries.get(i, ())

    def contains(self, i: int, coalition: Iterable[int]) -> bool:
        return frozenset(coalition) in self._entries.get(i, ())

    def record(self, i: int, coalition: Iterable[int]) -> "History":
        coalition = frozenset(coalition)
        if i not in coalition:
            raise ValueError(f"history entry for RSU {i} must contain it")
        if len(coalition) < 2:
            return self
        entries = dict(self._entries)
        entries[i] = entries.get(i, ()) + (coalition,)
        return History(entries)

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        return {k: v for k, v in self._entries.items() if v} == \
            {k: v for k, v in other._entries.items() if v}


@dataclass(frozen=True)
class SwitchEvent:
    round: int
    rsu: int
    source: frozenset  # coalition left, mover included
    target: frozenset  # coalition joined, mover included


@dataclass
class RunTrace:
    events: list[SwitchEvent] = field(default_factory=list)
    rounds: int = 0
    converged: bool = False
    history: History = field(default_factory=History)

    @property
    def total_switches(self) -> int:
        return len(self.events)

    def to_csv(self, fh=None) -> str | None:
        """Write ``round,rsu,from,to`` rows; returns the text when ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["round", "rsu", "from", "to"])
        for e in self.events:
            writer.writerow([e.round, e.rsu, _fmt(e.source), _fmt(e.target)])
        return out.getvalue() if fh is None else None


# ---------------------------------------------------------------------------
# preferences and switches

def preference_value(i: int, S: Iterable[int], history: History, scenario: Scenario,
                     context: str = JOINING) -> float:
    """Guarded payoff of RSU ``i`` for coalition ``S`` (which contains ``i``).

    When joining, a coalition of two or more is worth ``-inf`` unless every
    other member weakly gains from admitting ``i`` and ``i`` has not left it
    before. The current coalition (``staying``) is valued at the plain payoff.
    """
    S = frozenset(S)
    if i not in S:
        raise ValueError(f"RSU {i} is not a member of {sorted(S)}")
    if context not in (JOINING, STAYING):
        raise ValueError(f"unknown context {context!r}")
    return _preference(i, _mask(S), history, scenario.game, context == JOINING)


def _preference(i: int, mask: int, history: History, game, joining: bool) -> float:
    size = mask.bit_count()
    if joining and size > 1:
        if history.contains(i, _members_of(mask)):
            return -math.inf
        rest = mask & ~(1 << i)
        # egalitarian split: every remaining member gains the same amount
        if game.extra(mask) / size < game.extra(rest) / (size - 1):
            return -math.inf
    return game.payoff(i, mask)


def _members_of(mask: int) -> frozenset:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def candidates(i: int, partition: Partition) -> list[frozenset]:
    """Coalitions RSU ``i`` may switch into: every other coalition, plus the empty one."""
    current = partition.coalition_of(i)
    return [c for c in partition.coalitions if c is not current] + [frozenset()]


def best_switch(i: int, partition: Partition, history: History, scenario: Scenario) -> frozenset | None:
    """Target coalition of RSU ``i``'s best switch, or None when it should stay.

    An empty frozenset means leaving to act alone. Equal-valued targets are
    resolved towards the lexicographically smallest resulting coalition.
    """
    game = scenario.game
    bit = 1 << i
    stay = game.payoff(i, _mask(partition.coalition_of(i)))
    best_value, best_key, best_target = stay, None, None
    for target in candidates(i, partition):
        joined = _mask(target) | bit
        value = _preference(i, joined, history, game, True)
        if value < best_value or (value == best_value and best_target is None):
            continue
        key = sorted(target | {i})
        if value > best_value or key < best_key:
            best_value, best_key, best_target = value, key, target
    return best_target


def apply_switch(partition: Partition, i: int, target: Iterable[int],
                 history: History) -> tuple[Partition, History]:
    target = frozenset(target)
    source = partition.coalition_of(i)
    if target | {i} == source:
        raise ValueError(f"RSU {i} is already in {sorted(source)}")
    if target and target not in partition.coalitions:
        raise ValueError(f"{sorted(target)} is not a coalition of {partition}")
    blocks = []
    for c in partition.coalitions:
        if c is source or c == source:
            rest = c - {i}
            if rest:
                blocks.append(rest)
        elif c == target:
            blocks.append(c | {i})
        else:
            blocks.append(c)
    if not target:
        blocks.append(frozenset({i}))
    return Partition(blocks, partition.n), history.record(i, source)


def run_formation(scenario: Scenario, initial: Partition | None = None, seed=0,
                  max_rounds: int = 1000, history: History | None = None) -> tuple[Partition, RunTrace]:
    """Let RSUs switch in a freshly shuffled order each round until a quiet round.

    ``initial`` defaults to all singletons. The returned trace carries the final
    history; ``converged`` is False if ``max_rounds`` ran out first.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    partition = Partition.singletons(scenario.n) if initial is None else initial
    if partition.n != scenario.n:
        raise PartitionError(f"initial partition covers {partition.n} RSUs, scenario has {scenario.n}")
    history = History() if history is None else history
    rng = np.random.default_rng(seed)
    trace = RunTrace(history=history)
    for rnd in range(1, max_rounds + 1):
        moved = 0
        for i in rng.permutation(scenario.n):
            i = int(i)
            target = best_switch(i, partition, history, scenario)
            if target is None:
                continue
            source = partition.coalition_of(i)
            partition, history = apply_switch(partition, i, target, history)
            trace.events.append(SwitchEvent(rnd, i, source, target | {i}))
            moved += 1
        trace.rounds = rnd
        if moved == 0:
            trace.converged = True
            break
    trace.history = history
    return partition, trace


# ---------------------------------------------------------------------------
# verifiers and summaries

class StabilityReport(NamedTuple):
    stable: bool
    violations: list[tuple[int, frozenset]]


def is_nash_stable(partition: Partition, history: History | None, scenario: Scenario) -> StabilityReport:
    history = History() if history is None else history
    violations = []
    for i in range(partition.n):
        target = best_switch(i, partition, history, scenario)
        if target is not None:
            violations.append((i, target))
    return StabilityReport(not violations, violations)


def is_individually_stable(partition: Partition, scenario: Scenario,
                           history: History | None = None) -> StabilityReport:
    """No RSU has a strictly profitable move that every destination member accepts.

    Preferences are plain payoffs. Passing ``history`` additionally treats
    moves back into a previously left coalition as unavailable.
    """
    game = scenario.game
    violations = []
    for i in range(partition.n):
        current = partition.coalition_of(i)
        mine = game.payoff(i, _mask(current))
        for target in partition.coalitions:
            if target is current:
                continue
            joined = _mask(target) | (1 << i)
            if game.payoff(i, joined) <= mine:
                continue
            if history is not None and history.contains(i, target | {i}):
                continue
            if all(game.payoff(j, joined) >= game.payoff(j, _mask(target)) for j in target):
                violations.append((i, target))
        if len(current) > 1 and game.standalone[i] > mine:
            violations.append((i, frozenset()))
    return StabilityReport(not violations, violations)


def partition_payoffs(partition: Partition, scenario: Scenario) -> dict[int, float]:
    game = scenario.game
    return {i: game.payoff(i, _mask(c)) for c in partition.coalitions for i in c}


def partition_value(partition: Partition, scenario: Scenario) -> float:
    game = scenario.game
    return sum(game.value(_mask(c)) for c in partition.coalitions)
