"""Beam search over maximal rule applications, cost functions and static fidelity."""
from __future__ import annotations

import heapq
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .circuit import Circuit, canonical_hash
from .matcher import apply_matches, match_rule, maximal_matching_set

log = logging.getLogger(__name__)

COST_KINDS = ("total", "2q", "no-rz")
BUILTIN_DEVICES = ("toronto", "aspen11", "aria")


class OptimizeError(ValueError):
    pass


@dataclass
class BeamConfig:
    capacity: int = 8000
    timeout: float | None = 3600.0
    cost: str = "total"
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("queue capacity must be positive")
        if self.cost not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.cost!r}; choose from {', '.join(COST_KINDS)}")


def cost(c: Circuit, kind: str = "total") -> int:
    gates = [g for g in c.gates if not g.is_fence]
    if kind == "total":
        return len(gates)
    if kind == "2q":
        return sum(1 for g in gates if len(g.qubits) == 2)
    if kind == "no-rz":
        return sum(1 for g in gates if g.name != "rz")
    raise ValueError(f"unknown cost kind {kind!r}")


@dataclass
class DeviceModel:
    name: str
    f1: float
    f2: float
    virtual: frozenset = frozenset()
    overrides: dict = field(default_factory=dict)
    gates: dict | None = None  # optional explicit classification: name -> "1q" | "2q" | "virtual"

    def __post_init__(self):
        for v in [self.f1, self.f2, *self.overrides.values()]:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"fidelity {v} outside [0, 1]")
        self.virtual = frozenset(self.virtual)

    def gate_fidelity(self, name: str, arity: int) -> float:
        if name in self.overrides:
            return self.overrides[name]
        cls = None
        if self.gates is not None:
            if name not in self.gates:
                raise OptimizeError(f"device {self.name!r} does not classify gate {name!r}")
            cls = self.gates[name]
        elif name in self.virtual:
            cls = "virtual"
        elif arity in (1, 2):
            cls = f"{arity}q"
        if cls == "virtual":
            return 1.0
        if cls == "1q":
            return self.f1
        if cls == "2q":
            return self.f2
        raise OptimizeError(f"device {self.name!r} cannot classify gate {name!r}")

    @classmethod
    def from_json(cls, obj: dict | str) -> DeviceModel:
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["name"], float(obj["f1"]), float(obj["f2"]), frozenset(obj.get("virtual", ())),
                   {k: float(v) for k, v in obj.get("overrides", {}).items()}, obj.get("gates"))

    @classmethod
    def load(cls, arg: str) -> DeviceModel:
        if arg in BUILTIN_DEVICES:
            return cls.from_json((resources.files("queso") / "devices" / f"{arg}.json").read_text())
        return cls.from_json(Path(arg).read_text())


def fidelity(c: Circuit, d: DeviceModel) -> float:
    f = 1.0
    for g in c.gates:
        if g.is_fence:
            continue
        f *= d.gate_fidelity(g.name, len(g.qubits))
    return f


def apply_max(rule, c: Circuit) -> Circuit:
    """Rewrite one maximal set of non-overlapping matches of ``rule``."""
    ms = match_rule(rule, c)
    if not ms:
        return c
    return apply_matches(c, rule, maximal_matching_set(ms))


@dataclass
class BeamStats:
    expanded: int = 0
    enqueued: int = 0
    evicted: int = 0
    timed_out: bool = False
    elapsed: float = 0.0
    initial_cost: int = 0
    final_cost: int = 0


_WORKER_RULES: list = []


def _init_worker(rules):
    global _WORKER_RULES
    _WORKER_RULES = list(rules)


def _expand_chunk(args):
    c, lo, hi = args
    return [apply_max(_WORKER_RULES[i], c) for i in range(lo, hi)]


def _check_gateset(c: Circuit, rules: Sequence, gateset) -> None:
    if gateset is None:
        return
    for g in c.gates:
        if not g.is_fence and g.name not in gateset.gates:
            raise OptimizeError(f"gate {g.name!r} is not in gate set {gateset.name!r}")


def max_beam(c: Circuit, rules: Sequence, cfg: BeamConfig | None = None, gateset=None,
             stats: BeamStats | None = None) -> Circuit:
    """Best-first search where each step applies one rule maximally."""
    cfg = cfg or BeamConfig()
    stats = stats if stats is not None else BeamStats()
    _check_gateset(c, rules, gateset)
    t0 = time.monotonic()
    deadline = None if cfg.timeout is None else t0 + cfg.timeout
    best, best_cost = c, cost(c, cfg.cost)
    stats.initial_cost = best_cost
    counter = 0
    heap = [(best_cost, counter, c)]
    seen = {canonical_hash(c)}
    pool = None
    if cfg.jobs > 1 and len(rules) > 1:
        pool = ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_init_worker, initargs=(list(rules),))
    try:
        while heap:
            if deadline is not None and time.monotonic() > deadline:
                stats.timed_out = True
                break
            _, _, cur = heapq.heappop(heap)
            stats.expanded += 1
            if pool is not None:
                step = -(-len(rules) // cfg.jobs)
                chunks = [(cur, lo, min(lo + step, len(rules))) for lo in range(0, len(rules), step)]
                children = [x for part in pool.map(_expand_chunk, chunks) for x in part]
            else:
                children = []
                for rule in rules:
                    if deadline is not None and time.monotonic() > deadline:
                        stats.timed_out = True
                        break
                    children.append(apply_max(rule, cur))
            for new in children:
                if new is cur:
                    continue
                cst = cost(new, cfg.cost)
                if cst > best_cost:
                    continue
                h = canonical_hash(new)
                if h in seen:
                    continue
                seen.add(h)
                if cst < best_cost:
                    best, best_cost = new, cst
                counter += 1
                heapq.heappush(heap, (cst, counter, new))
                stats.enqueued += 1
                if len(heap) > cfg.capacity:
                    worst = max(range(len(heap)), key=lambda i: heap[i][:2])
                    heap[worst] = heap[-1]
                    heap.pop()
                    heapq.heapify(heap)
                    stats.evicted += 1
            if stats.timed_out:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    stats.elapsed = time.monotonic() - t0
    stats.final_cost = best_cost
    return best
