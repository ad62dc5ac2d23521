"""Enumerative synthesis of (symbolic) circuit equivalences and rewrite-rule extraction."""
from __future__ import annotations

import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .circuit import SYMBOLIC, Circuit, GateInstance
from .gateset import Gateset, load_gateset
from .params import ParamExpr
from .verifier import Pif, PifEntry

log = logging.getLogger(__name__)

RULES_FORMAT = "queso-rules"
RULES_VERSION = 1


class RuleFileError(ValueError):
    pass


@dataclass
class SynthConfig:
    gateset: Gateset
    max_qubits: int = 3
    max_size: int = 3
    symbolic_max_qubits: int | None = None  # default: min(2, max_qubits)
    symbolic_max_size: int = 3
    seed: int = 0
    parameters: list | None = None
    timeout: float | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.parameters is None:
            self.parameters = list(self.gateset.parameters)
        if self.max_qubits < 1 or self.max_size < 0:
            raise ValueError("max_qubits must be >= 1 and max_size >= 0")
        if self.symbolic_max_qubits is None:
            self.symbolic_max_qubits = min(2, self.max_qubits)
        if self.symbolic_max_qubits > self.max_qubits or self.symbolic_max_qubits > 2:
            raise ValueError("symbolic_max_qubits must be <= max_qubits and <= 2")
        if self.symbolic_max_size < 0:
            raise ValueError("symbolic_max_size must be >= 0")

    def snapshot(self) -> dict:
        return {"gateset": self.gateset.id, "max_qubits": self.max_qubits, "max_size": self.max_size,
                "symbolic_max_qubits": self.symbolic_max_qubits,
                "symbolic_max_size": self.symbolic_max_size, "seed": self.seed,
                "parameters": [str(p) for p in self.parameters]}


# -- enumeration -------------------------------------------------------------

def _gate_choices(cfg: SynthConfig, n: int) -> list[GateInstance]:
    out = []
    for gd in cfg.gateset.gates.values():
        for qs in itertools.permutations(range(n), gd.arity):
            for ps in itertools.product(cfg.parameters, repeat=gd.params):
                out.append(GateInstance(gd.name, qs, tuple(ps)))
    return out


def _admissible(c: Circuit, cfg: SynthConfig, table: frozenset) -> bool:
    used: dict[int, int] = {}
    for g in c.gates:
        for p in g.params:
            if p not in table:
                return False
            for k in p.vars:
                used[k] = used.get(k, 0) + 1
    if cfg.gateset.param_use_once and any(v > 1 for v in used.values()):
        return False
    return True


def _key(c: Circuit) -> str:
    return c.serialize()


def _sort_key(c: Circuit) -> tuple:
    return (c.size, c.serialize())


def extensions(c: Circuit, choices: Sequence[GateInstance], cfg: SynthConfig,
               table: frozenset) -> Iterator[Circuit]:
    """Canonical circuits obtained by appending one gate, in deterministic order."""
    for g in choices:
        child = Circuit(c.n, c.gates + (g,)).canonical()
        if _admissible(child, cfg, table):
            yield child


def enumerate_circuits(cfg: SynthConfig, n: int, max_size: int | None = None) -> Iterator[Circuit]:
    """Every canonical circuit on ``n`` qubits up to ``max_size`` gates, bottom-up by size."""
    max_size = cfg.max_size if max_size is None else max_size
    choices = _gate_choices(cfg, n)
    table = frozenset(cfg.parameters)
    level = [Circuit(n, ())]
    seen = {_key(level[0])}
    yield level[0]
    for _ in range(max_size):
        nxt = []
        for c in level:
            for child in extensions(c, choices, cfg, table):
                k = _key(child)
                if k not in seen:
                    seen.add(k)
                    nxt.append(child)
                    yield child
        level = nxt


def enumerate_interpretations(arity: int) -> list[tuple[int, ...]]:
    if arity not in (1, 2):
        raise ValueError("symbolic gates have arity 1 or 2")
    return list(itertools.permutations(range(1 << arity)))


class _Stratum:
    """Representative-based growth for one qubit count."""

    def __init__(self, cfg: SynthConfig, n: int, deadline: float | None):
        self.cfg = cfg
        self.n = n
        self.deadline = deadline
        self.pif = Pif(cfg.gateset, n, cfg.seed, max_qubits=max(3, n))
        self.ev = self.pif.evaluator
        self.best: dict[bytes, tuple] = {}  # class digest -> sort key of representative
        self.states: dict[tuple, tuple] = {}
        self.timed_out = False

    def _state(self, c: Circuit) -> tuple:
        st = self.states.get(c.gates[:-1]) if c.gates else None
        if st is not None:
            return self.ev.apply(st, c.n, c.gates[-1])
        return self.ev.matrix(c)

    def insert(self, c: Circuit) -> tuple[bytes, tuple]:
        st = self._state(c)
        value = self.ev.value_of(st)
        self.pif.insert(c, None, value)
        k = self.pif.key(value)
        sk = _sort_key(c)
        if k not in self.best or sk < self.best[k]:
            self.best[k] = sk
        return k, st

    def run(self, max_size: int) -> Pif:
        cfg = self.cfg
        choices = _gate_choices(cfg, self.n)
        table = frozenset(cfg.parameters)
        empty = Circuit(self.n, ())
        seen = {_key(empty)}
        k, st = self.insert(empty)
        reps = [(empty, st)]
        for size in range(1, max_size + 1):
            fresh = []
            for c, st in reps:
                self.states = {c.gates: st}
                for child in extensions(c, choices, cfg, table):
                    ck = _key(child)
                    if ck in seen:
                        continue
                    seen.add(ck)
                    dk, cst = self.insert(child)
                    fresh.append((child, dk, cst))
                if self.deadline is not None and time.monotonic() > self.deadline:
                    self.timed_out = True
                    log.warning("synthesis timed out at size %d on %d qubits", size, self.n)
                    return self.pif
            reps = [(c, cst) for c, dk, cst in fresh if self.best[dk] == _sort_key(c)]
            log.info("n=%d size=%d: %d new circuits, %d representatives, %d classes",
                     self.n, size, len(fresh), len(reps), len(self.pif))
        self.states = {}
        return self.pif


def _representatives(pif: Pif, max_size: int) -> list[Circuit]:
    out = []
    for members in pif.class_list():
        rep = min((e.circuit for e in members), key=_sort_key)
        if rep.size <= max_size:
            out.append(rep)
    return sorted(out, key=_sort_key)


def _shift_params(c: Circuit, offset: int) -> Circuit:
    if not offset:
        return c
    pm = {k: k + offset for k in c.param_vars()}
    return Circuit(c.n, tuple(g.relabel(range(c.n), pm) for g in c.gates))


def symbolic_circuits(cfg: SynthConfig, n: int, reps: Sequence[Circuit]) -> Iterator[Circuit]:
    """Circuits ``A; S(Q); B`` with A, B representatives and S counted toward the size bound."""
    table = frozenset(cfg.parameters)
    budget = cfg.symbolic_max_size - 1
    placements = [qs for k in (1, 2) if k <= n for qs in itertools.combinations(range(n), k)]
    seen = set()
    for a in reps:
        nv = len(a.param_vars())
        for b in reps:
            if a.size + b.size > budget:
                continue
            b_shift = _shift_params(b, nv)
            for perm in itertools.permutations(range(n)):
                b_rel = b_shift.relabeled(perm)
                for qs in placements:
                    c = Circuit(n, a.gates + (GateInstance(SYMBOLIC, qs),) + b_rel.gates)
                    if not _admissible(Circuit(n, tuple(g for g in c.gates if not g.is_symbolic)), cfg, table):
                        continue
                    lin = c.linearize()
                    k = _key(lin)
                    if k not in seen:
                        seen.add(k)
                        yield lin


def _synth_stratum(args) -> tuple[int, Pif, Pif | None, bool]:
    cfg, n, deadline = args
    st = _Stratum(cfg, n, deadline)
    # max_size bounds every circuit, symbolic ones included
    sym_budget = min(cfg.symbolic_max_size, cfg.max_size) - 1 if n <= cfg.symbolic_max_qubits else -1
    pif = st.run(max(cfg.max_size, sym_budget))
    spif = None
    if sym_budget >= 0 and not st.timed_out:
        spif = Pif(cfg.gateset, n, cfg.seed, max_qubits=max(3, n))
        reps = _representatives(pif, sym_budget)
        for c in symbolic_circuits(cfg, n, reps):
            sgate = next(g for g in c.gates if g.is_symbolic)
            for perm in enumerate_interpretations(len(sgate.qubits)):
                spif.insert(c, (SYMBOLIC, perm))
            if deadline is not None and time.monotonic() > deadline:
                st.timed_out = True
                break
    if cfg.max_size < max(cfg.max_size, sym_budget):
        _trim(pif, cfg.max_size)
    return n, pif, spif, st.timed_out


def _trim(pif: Pif, max_size: int) -> None:
    for k in list(pif.classes):
        pif.classes[k] = [e for e in pif.classes[k] if e.circuit.size <= max_size]
        if not pif.classes[k]:
            del pif.classes[k]
            del pif.ids[k]


@dataclass
class SynthResult:
    pifs: dict = field(default_factory=dict)  # n -> Pif
    symbolic: dict = field(default_factory=dict)  # n -> Pif
    timed_out: bool = False
    elapsed: float = 0.0

    def all_pifs(self) -> list[Pif]:
        return [self.pifs[n] for n in sorted(self.pifs)] + [self.symbolic[n] for n in sorted(self.symbolic)]

    @property
    def failure_bound(self):
        return sum((p.failure_bound for p in self.all_pifs()), start=0)


def synth_eq(cfg: SynthConfig) -> SynthResult:
    """Populate one PIF per qubit count (plus symbolic PIFs) by representative-based growth."""
    t0 = time.monotonic()
    deadline = None if cfg.timeout is None else t0 + cfg.timeout
    tasks = [(cfg, n, deadline) for n in range(1, cfg.max_qubits + 1)]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as pool:
            results = list(pool.map(_synth_stratum, tasks))
    else:
        results = [_synth_stratum(t) for t in tasks]
    res = SynthResult()
    for n, pif, spif, to in results:
        res.pifs[n] = pif
        if spif is not None:
            res.symbolic[n] = spif
        res.timed_out |= to
    res.elapsed = time.monotonic() - t0
    return res


# -- rules ---------------------------------------------------------------------

@dataclass(frozen=True)
class RewriteRule:
    lhs: Circuit
    rhs: Circuit
    interp: tuple | None = None  # (symbolic gate name, permutation table)

    @property
    def kind(self) -> str:
        return "plain" if self.interp is None else "symbolic"

    @property
    def is_symbolic(self) -> bool:
        return self.interp is not None

    @property
    def size_class(self) -> str:
        return "size-reducing" if self.rhs.size < self.lhs.size else "size-preserving"

    @property
    def interp_map(self):
        return None if self.interp is None else {self.interp[0]: self.interp[1]}

    def key(self) -> str:
        tag = "" if self.interp is None else f" | {self.interp[0]}:{','.join(map(str, self.interp[1]))}"
        return f"{self.lhs.serialize()} -> {self.rhs.serialize()}{tag}"

    def normalized(self) -> RewriteRule:
        """Rename qubits and parameters by first use in the LHS, keep only the qubits used."""
        qorder: list[int] = []
        for g in self.lhs.gates:
            for q in g.qubits:
                if q not in qorder:
                    qorder.append(q)
        for g in self.rhs.gates:
            for q in g.qubits:
                if q not in qorder:
                    qorder.append(q)
        qmap = {q: i for i, q in enumerate(qorder)}
        pvars = self.lhs.param_vars() + [k for k in self.rhs.param_vars() if k not in self.lhs.param_vars()]
        pmap = {k: i + 1 for i, k in enumerate(pvars)}
        n = max(1, len(qorder))
        return RewriteRule(self.lhs.relabeled(qmap, pmap, n), self.rhs.relabeled(qmap, pmap, n), self.interp)

    def __str__(self) -> str:
        return self.key()


def _pairs(members: list[PifEntry]):
    ordered = sorted(members, key=lambda e: _sort_key(e.circuit))
    for i, small in enumerate(ordered):
        for big in ordered[i + 1:]:
            if small.interp != big.interp:
                continue
            yield RewriteRule(big.circuit, small.circuit, big.interp)
            if big.circuit.size == small.circuit.size:
                yield RewriteRule(small.circuit, big.circuit, big.interp)


def extract_rules(result: SynthResult | Pif, cfg: SynthConfig | None = None) -> list[RewriteRule]:
    """All rules between members of a class sharing an interpretation, normalized and deduplicated."""
    pifs = result.all_pifs() if isinstance(result, SynthResult) else [result]
    out: dict[str, RewriteRule] = {}
    for pif in pifs:
        for members in pif.class_list():
            if len(members) < 2:
                continue
            for r in _pairs(members):
                r = r.normalized()
                out.setdefault(r.key(), r)
    return sorted(out.values(), key=_rule_order)


def _rule_order(r: RewriteRule) -> tuple:
    return (r.lhs.size - r.rhs.size < 0, -(r.lhs.size - r.rhs.size), r.lhs.size, r.key())


# -- pruning predicates -------------------------------------------------------------

def _side_connected(c: Circuit) -> bool:
    return c.is_connected()


def prune_disconnected(r: RewriteRule) -> bool:
    return not (_side_connected(r.lhs) and _side_connected(r.rhs))


def prune_lhs_arithmetic(r: RewriteRule) -> bool:
    return any(isinstance(p, ParamExpr) and p.is_arithmetic() for g in r.lhs.gates for p in g.params)


def prune_rhs_vars(r: RewriteRule) -> bool:
    return not set(r.rhs.param_vars()) <= set(r.lhs.param_vars())


def prune_rhs_qubits(r: RewriteRule) -> bool:
    return not r.rhs.qubits_used() <= r.lhs.qubits_used()


def _sym_index(c: Circuit) -> int | None:
    for i, g in enumerate(c.gates):
        if g.is_symbolic:
            return i
    return None


def prune_symbolic_empty_side(r: RewriteRule) -> bool:
    if not r.is_symbolic:
        return False
    i = _sym_index(r.lhs)
    if i is None:
        return True
    return not r.lhs.ancestors([i]) or not r.lhs.descendants([i])


def prune_symbolic_placement(r: RewriteRule) -> bool:
    if not r.is_symbolic:
        return False
    i, j = _sym_index(r.lhs), _sym_index(r.rhs)
    return i is None or j is None or r.lhs.gates[i].qubits != r.rhs.gates[j].qubits


def _frontier(c: Circuit, first: bool) -> set[GateInstance]:
    prev, nxt = c.dag()
    adj = prev if first else nxt
    return {c.gates[i] for i in range(len(c.gates)) if not adj[i] and not c.gates[i].is_symbolic}


def prune_common_subcircuit(r: RewriteRule) -> bool:
    """A gate that can be peeled off the front (or back) of both sides."""
    if _frontier(r.lhs, True) & _frontier(r.rhs, True):
        return True
    return bool(_frontier(r.lhs, False) & _frontier(r.rhs, False))


def prune_identical(r: RewriteRule) -> bool:
    return r.lhs.linearize() == r.rhs.linearize()


PRUNE_PREDICATES = (
    prune_identical,
    prune_disconnected,
    prune_lhs_arithmetic,
    prune_rhs_vars,
    prune_rhs_qubits,
    prune_symbolic_empty_side,
    prune_symbolic_placement,
    prune_common_subcircuit,
)


def prune_rules(rules: Sequence[RewriteRule]) -> list[RewriteRule]:
    return [r for r in rules if not any(p(r) for p in PRUNE_PREDICATES)]


# -- rule files -------------------------------------------------------------------

def _circ_json(c: Circuit) -> dict:
    return {"n": c.n, "gates": [[g.name, list(g.qubits), [str(p) for p in g.params]] for g in c.gates]}


def _circ_from_json(obj: dict) -> Circuit:
    gates = tuple(GateInstance(name, tuple(qs), tuple(ParamExpr.parse(p) for p in ps))
                  for name, qs, ps in obj["gates"])
    return Circuit(int(obj["n"]), gates)


def rules_to_json(rules: Sequence[RewriteRule], gateset: Gateset, meta: dict | None = None) -> str:
    body = {
        "format": RULES_FORMAT,
        "version": RULES_VERSION,
        "gateset": gateset.id,
        "gateset_spec": gateset.source,
        "meta": meta or {},
        "rules": [{"lhs": _circ_json(r.lhs), "rhs": _circ_json(r.rhs),
                   "class": r.size_class,
                   "interpretation": None if r.interp is None else
                   {"gate": r.interp[0], "table": list(r.interp[1])}} for r in rules],
    }
    return json.dumps(body, indent=1, sort_keys=True) + "\n"


def save_rules(rules: Sequence[RewriteRule], path: str | Path, gateset: Gateset, meta: dict | None = None) -> None:
    Path(path).write_text(rules_to_json(rules, gateset, meta))


@dataclass
class RuleSet:
    rules: list
    gateset_id: str
    gateset: Gateset | None = None
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)


def load_rules(path: str | Path, gateset: Gateset | None = None) -> RuleSet:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise RuleFileError(f"corrupt rule file {path}: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("format") != RULES_FORMAT:
        raise RuleFileError(f"{path} is not a rule file")
    if obj.get("version") != RULES_VERSION:
        raise RuleFileError(f"unsupported rule file version {obj.get('version')!r}")
    if gateset is not None and obj.get("gateset") != gateset.id:
        raise RuleFileError(f"rules were synthesized for {obj.get('gateset')}, not {gateset.id}")
    try:
        rules = []
        for r in obj["rules"]:
            it = r.get("interpretation")
            interp = None if it is None else (it["gate"], tuple(it["table"]))
            rules.append(RewriteRule(_circ_from_json(r["lhs"]), _circ_from_json(r["rhs"]), interp))
        gs = gateset if gateset is not None else (
            load_gateset(obj["gateset_spec"]) if obj.get("gateset_spec") else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise RuleFileError(f"corrupt rule file {path}: {exc}") from exc
    return RuleSet(rules, obj["gateset"], gs, obj.get("meta", {}))


def synthesize(cfg: SynthConfig) -> tuple[SynthResult, list[RewriteRule]]:
    res = synth_eq(cfg)
    rules = prune_rules(extract_rules(res, cfg))
    return res, rules
